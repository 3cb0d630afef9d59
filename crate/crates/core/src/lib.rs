//! Federated multi-label feature selection.
//!
//! Clients holding horizontally partitioned multi-label data compute a
//! feature/label mutual-information matrix and a feature/feature
//! correlation-distance matrix on their local shard. An edge server
//! averages the matrices, turns them into two maximization objectives
//! (relevance and redundancy distance), and ranks every feature by its
//! Pareto front and crowding distance. The ranking is broadcast back so each
//! client can keep its top-k columns.
//!
//! Module map:
//!
//! - [`dataset`]: loading (ARFF, CSV), discretization, partitioning, splits
//! - [`infotheory`]: plug-in entropy / mutual information estimators
//! - [`client`]: the local phase that produces a [`client::ClientReport`]
//! - [`server`]: aggregation and objective extraction
//! - [`pareto`]: non-dominated sorting, crowding distance, final scores
//! - [`federation`]: the one-round protocol over in-process channels or TCP
//! - [`mlknn`]: ML-kNN classifier and the multi-label evaluation metrics
//! - [`experiment`]: the end-to-end "select, reduce, classify" pipeline
//! - [`cli`]: the `fmlfs` command-line driver

pub mod cli;
pub mod client;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod infotheory;
pub mod matrix;
pub mod mlknn;
pub mod pareto;
pub mod server;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// Version tag carried by every wire message and JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
