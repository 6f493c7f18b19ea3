use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("header mismatch: {0}")]
    Header(String),

    #[error("row {row}, column {column}: cannot parse {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column {column}: missing value")]
    Missing { row: usize, column: String },

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("row {row}: {message}")]
    InvalidValue { row: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("feature fingerprint mismatch: model expects [{expected}], table has [{found}]")]
    Fingerprint { expected: String, found: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-finite loss encountered during training")]
    NonFinite,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
