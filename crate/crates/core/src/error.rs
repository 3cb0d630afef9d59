use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("arff parse error at line {line}: {message}")]
    Arff { line: usize, message: String },

    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("label manifest error: {0}")]
    LabelManifest(String),

    #[error("non-binary label value {value:?} for label {label:?}")]
    NonBinaryLabel { label: String, value: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid report: {0}")]
    InvalidReport(String),

    #[error("duplicate report from client {0}")]
    DuplicateClient(u32),

    #[error("non-finite objective value for feature {0}")]
    NonFiniteObjective(usize),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("round aborted: {0}")]
    Aborted(String),

    #[error("timed out waiting for clients {missing:?}")]
    Timeout { missing: Vec<u32> },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Stream(_) => "io",
            Error::Arff { .. } => "arff",
            Error::Csv { .. } => "csv",
            Error::LabelManifest(_) => "label_manifest",
            Error::NonBinaryLabel { .. } => "non_binary_label",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidReport(_) => "invalid_report",
            Error::DuplicateClient(_) => "duplicate_client",
            Error::NonFiniteObjective(_) => "non_finite_objective",
            Error::Protocol(_) => "protocol",
            Error::Aborted(_) => "aborted",
            Error::Timeout { .. } => "timeout",
            Error::Json(_) => "json",
        }
    }
}
