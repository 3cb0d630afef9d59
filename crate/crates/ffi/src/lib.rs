//! C ABI over the `fmlfs` library.
//!
//! Every fallible call returns an [`FmlfsStatus`]; on failure the message is
//! available from [`fmlfs_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their matching `_free` function.
//! Strings returned through `char **` belong to the caller and are released
//! with [`fmlfs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fmlfs::client::{compute_local_report, ClientReport};
use fmlfs::dataset::{self, discretize, partition_noniid, LabelSpec, MultiLabelDataset};
use fmlfs::experiment::partition_seed;
use fmlfs::federation::{run_round, RunConfig};
use fmlfs::pareto::FeatureRanking;
use fmlfs::server::{global_ranking, AggregationMode};
use fmlfs::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmlfsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    Protocol = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A loaded multi-label dataset.
pub struct FmlfsDataset(MultiLabelDataset);

/// A feature ranking produced by the server.
pub struct FmlfsRanking(FeatureRanking);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FmlfsStatus {
    match e {
        Error::Io { .. } | Error::Stream(_) => FmlfsStatus::Io,
        Error::Arff { .. }
        | Error::Csv { .. }
        | Error::LabelManifest(_)
        | Error::NonBinaryLabel { .. }
        | Error::Json(_)
        | Error::InvalidReport(_) => FmlfsStatus::Parse,
        Error::LengthMismatch { .. } | Error::DimensionMismatch(_) => FmlfsStatus::DimensionMismatch,
        Error::DuplicateClient(_) | Error::Protocol(_) | Error::Aborted(_) | Error::Timeout { .. } => {
            FmlfsStatus::Protocol
        }
        Error::InvalidDataset(_) | Error::InvalidArgument(_) | Error::NonFiniteObjective(_) => {
            FmlfsStatus::InvalidArgument
        }
    }
}

struct Failure(FmlfsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FmlfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FmlfsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FmlfsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FmlfsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FmlfsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(FmlfsStatus::Panic, "string contains NUL".into()))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fmlfs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fmlfs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn load(path: *const c_char, spec: impl FnOnce() -> Result<LabelSpec, Failure>, out: *mut *mut FmlfsDataset) -> FmlfsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = PathBuf::from(str_arg(path, "path")?);
        let ds = dataset::load(&path, &spec()?)?;
        *out = Box::into_raw(Box::new(FmlfsDataset(ds)));
        Ok(())
    })
}

/// Loads a CSV or ARFF file whose last `num_labels` columns are labels.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_dataset_load(
    path: *const c_char,
    num_labels: usize,
    out: *mut *mut FmlfsDataset,
) -> FmlfsStatus {
    load(path, || Ok(LabelSpec::Count(num_labels)), out)
}

/// Loads an ARFF file whose labels are listed in an XML manifest.
///
/// # Safety
/// `path` and `manifest` must be NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_dataset_load_with_manifest(
    path: *const c_char,
    manifest: *const c_char,
    out: *mut *mut FmlfsDataset,
) -> FmlfsStatus {
    load(path, || Ok(LabelSpec::Manifest(PathBuf::from(str_arg(manifest, "manifest")?))), out)
}

/// Builds a dataset from row-major buffers: `features` holds `n * d`
/// finite values, `labels` holds `n * l` bytes that are 0 or 1.
///
/// # Safety
/// Both buffers must be valid for the stated lengths; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_dataset_from_arrays(
    features: *const f64,
    labels: *const u8,
    n: usize,
    d: usize,
    l: usize,
    out: *mut *mut FmlfsDataset,
) -> FmlfsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if features.is_null() {
            return Err(null("features"));
        }
        if labels.is_null() {
            return Err(null("labels"));
        }
        let size = |a: usize, b: usize| {
            a.checked_mul(b)
                .ok_or_else(|| Failure(FmlfsStatus::InvalidArgument, "size overflow".into()))
        };
        let x = std::slice::from_raw_parts(features, size(n, d)?).to_vec();
        let y = std::slice::from_raw_parts(labels, size(n, l)?).to_vec();
        let ds = MultiLabelDataset::from_matrices(
            fmlfs::Matrix::from_vec(n, d, x)?,
            fmlfs::Matrix::from_vec(n, l, y)?,
        )?;
        *out = Box::into_raw(Box::new(FmlfsDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_dataset_free(ds: *mut FmlfsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Instance, feature and label counts. Any output pointer may be NULL.
///
/// # Safety
/// `ds` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_dataset_dims(
    ds: *const FmlfsDataset,
    instances: *mut usize,
    features: *mut usize,
    labels: *mut usize,
) -> FmlfsStatus {
    guard(|| {
        let ds = &ref_arg(ds, "dataset")?.0;
        for (p, v) in [
            (instances, ds.num_instances()),
            (features, ds.num_features()),
            (labels, ds.num_labels()),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Partitions `ds` over `num_clients` label-skewed shards, runs one
/// in-process federated round, and returns the ranking.
///
/// # Safety
/// `ds` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_rank(
    ds: *const FmlfsDataset,
    num_clients: u32,
    alpha: f64,
    bins: u32,
    seed: u64,
    out: *mut *mut FmlfsRanking,
) -> FmlfsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let ds = &ref_arg(ds, "dataset")?.0;
        let config = RunConfig {
            num_clients,
            alpha,
            bins,
            seed,
            top_k: vec![],
            ..RunConfig::default()
        };
        config.validate()?;
        let plan = partition_noniid(ds, num_clients, alpha, partition_seed(seed))?;
        let outcome = run_round(&config, &plan.shards(ds)?)?;
        *out = Box::into_raw(Box::new(FmlfsRanking(outcome.ranking)));
        Ok(())
    })
}

/// Client side: discretizes `ds` into `bins` bins and returns the report
/// as JSON.
///
/// # Safety
/// `ds` must be a live handle; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_client_report_json(
    ds: *const FmlfsDataset,
    client_id: u32,
    bins: u32,
    out_json: *mut *mut c_char,
) -> FmlfsStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let ds = &ref_arg(ds, "dataset")?.0;
        let report = compute_local_report(&discretize(ds, bins)?, client_id)?;
        *out = to_c_string(serde_json::to_string(&report).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Server side: aggregates `count` JSON client reports and ranks features.
/// `weighted` selects size-weighted averaging.
///
/// # Safety
/// `reports` must point to `count` NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_server_rank(
    reports: *const *const c_char,
    count: usize,
    weighted: bool,
    out: *mut *mut FmlfsRanking,
) -> FmlfsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if reports.is_null() {
            return Err(null("reports"));
        }
        let parsed = std::slice::from_raw_parts(reports, count)
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let text = str_arg(p, &format!("report {i}"))?;
                serde_json::from_str::<ClientReport>(text)
                    .map_err(|e| Failure(FmlfsStatus::Parse, format!("report {i}: {e}")))
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        let mode = if weighted { AggregationMode::Weighted } else { AggregationMode::Unweighted };
        *out = Box::into_raw(Box::new(FmlfsRanking(global_ranking(&parsed, mode)?)));
        Ok(())
    })
}

/// # Safety
/// `r` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_ranking_free(r: *mut FmlfsRanking) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of ranked features, or 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_ranking_len(r: *const FmlfsRanking) -> usize {
    r.as_ref().map_or(0, |r| r.0.num_features())
}

/// Copies the feature order (best first) into `buf`. `written` receives
/// the full length even when `capacity` is too small.
///
/// # Safety
/// `r` must be a live handle; `buf` valid for `capacity` entries (may be
/// NULL when `capacity` is 0); `written` writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_ranking_order(
    r: *const FmlfsRanking,
    buf: *mut u32,
    capacity: usize,
    written: *mut usize,
) -> FmlfsStatus {
    guard(|| {
        let order = ref_arg(r, "ranking")?.0.order();
        if let Some(w) = written.as_mut() {
            *w = order.len();
        }
        if capacity < order.len() {
            return Err(Failure(
                FmlfsStatus::BufferTooSmall,
                format!("need {} entries, got {capacity}", order.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, order.len()).copy_from_slice(order);
        Ok(())
    })
}

/// The ranking as JSON (`order` plus per-feature records).
///
/// # Safety
/// `r` must be a live handle; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_ranking_to_json(r: *const FmlfsRanking, out_json: *mut *mut c_char) -> FmlfsStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        *out = ptr::null_mut();
        let r = &ref_arg(r, "ranking")?.0;
        *out = to_c_string(serde_json::to_string(r).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Parses a ranking from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fmlfs_ranking_from_json(json: *const c_char, out: *mut *mut FmlfsRanking) -> FmlfsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let r: FeatureRanking = serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(FmlfsRanking(r)));
        Ok(())
    })
}
