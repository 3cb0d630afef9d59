#ifndef FMLFS_H
#define FMLFS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum FmlfsStatus {
  FMLFS_STATUS_OK = 0,
  FMLFS_STATUS_NULL_POINTER = 1,
  FMLFS_STATUS_INVALID_ARGUMENT = 2,
  FMLFS_STATUS_IO = 3,
  FMLFS_STATUS_PARSE = 4,
  FMLFS_STATUS_DIMENSION_MISMATCH = 5,
  FMLFS_STATUS_PROTOCOL = 6,
  FMLFS_STATUS_BUFFER_TOO_SMALL = 7,
  FMLFS_STATUS_PANIC = 8,
} FmlfsStatus;

/**
 * A loaded multi-label dataset.
 */
typedef struct FmlfsDataset FmlfsDataset;

/**
 * A feature ranking produced by the server.
 */
typedef struct FmlfsRanking FmlfsRanking;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *fmlfs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fmlfs_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void fmlfs_string_free(char *s);

/**
 * Loads a CSV or ARFF file whose last `num_labels` columns are labels.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FmlfsStatus fmlfs_dataset_load(const char *path, size_t num_labels, struct FmlfsDataset **out);

/**
 * Loads an ARFF file whose labels are listed in an XML manifest.
 *
 * # Safety
 * `path` and `manifest` must be NUL-terminated strings; `out` writable.
 */
enum FmlfsStatus fmlfs_dataset_load_with_manifest(const char *path,
                                                  const char *manifest,
                                                  struct FmlfsDataset **out);

/**
 * Builds a dataset from row-major buffers: `features` holds `n * d`
 * finite values, `labels` holds `n * l` bytes that are 0 or 1.
 *
 * # Safety
 * Both buffers must be valid for the stated lengths; `out` writable.
 */
enum FmlfsStatus fmlfs_dataset_from_arrays(const double *features,
                                           const uint8_t *labels,
                                           size_t n,
                                           size_t d,
                                           size_t l,
                                           struct FmlfsDataset **out);

/**
 * # Safety
 * `ds` must come from this library and not have been freed. NULL is ignored.
 */
void fmlfs_dataset_free(struct FmlfsDataset *ds);

/**
 * Instance, feature and label counts. Any output pointer may be NULL.
 *
 * # Safety
 * `ds` must be a live handle; non-NULL outputs must be writable.
 */
enum FmlfsStatus fmlfs_dataset_dims(const struct FmlfsDataset *ds,
                                    size_t *instances,
                                    size_t *features,
                                    size_t *labels);

/**
 * Partitions `ds` over `num_clients` label-skewed shards, runs one
 * in-process federated round, and returns the ranking.
 *
 * # Safety
 * `ds` must be a live handle; `out` writable.
 */
enum FmlfsStatus fmlfs_rank(const struct FmlfsDataset *ds,
                            uint32_t num_clients,
                            double alpha,
                            uint32_t bins,
                            uint64_t seed,
                            struct FmlfsRanking **out);

/**
 * Client side: discretizes `ds` into `bins` bins and returns the report
 * as JSON.
 *
 * # Safety
 * `ds` must be a live handle; `out_json` writable.
 */
enum FmlfsStatus fmlfs_client_report_json(const struct FmlfsDataset *ds,
                                          uint32_t client_id,
                                          uint32_t bins,
                                          char **out_json);

/**
 * Server side: aggregates `count` JSON client reports and ranks features.
 * `weighted` selects size-weighted averaging.
 *
 * # Safety
 * `reports` must point to `count` NUL-terminated strings; `out` writable.
 */
enum FmlfsStatus fmlfs_server_rank(const char *const *reports,
                                   size_t count,
                                   bool weighted,
                                   struct FmlfsRanking **out);

/**
 * # Safety
 * `r` must come from this library and not have been freed. NULL is ignored.
 */
void fmlfs_ranking_free(struct FmlfsRanking *r);

/**
 * Number of ranked features, or 0 for NULL.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
size_t fmlfs_ranking_len(const struct FmlfsRanking *r);

/**
 * Copies the feature order (best first) into `buf`. `written` receives
 * the full length even when `capacity` is too small.
 *
 * # Safety
 * `r` must be a live handle; `buf` valid for `capacity` entries (may be
 * NULL when `capacity` is 0); `written` writable or NULL.
 */
enum FmlfsStatus fmlfs_ranking_order(const struct FmlfsRanking *r,
                                     uint32_t *buf,
                                     size_t capacity,
                                     size_t *written);

/**
 * The ranking as JSON (`order` plus per-feature records).
 *
 * # Safety
 * `r` must be a live handle; `out_json` writable.
 */
enum FmlfsStatus fmlfs_ranking_to_json(const struct FmlfsRanking *r, char **out_json);

/**
 * Parses a ranking from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` writable.
 */
enum FmlfsStatus fmlfs_ranking_from_json(const char *json, struct FmlfsRanking **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FMLFS_H */
