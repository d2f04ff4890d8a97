use std::path::PathBuf;

use thiserror::Error;
use xemo_nn::NnError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot decode audio {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("value out of range at row {row}, column `{column}`: {value} not in [{min}, {max}]")]
    OutOfRange {
        row: usize,
        column: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("duplicate song id `{0}`")]
    Duplicate(String),

    #[error("annotation table has no rows")]
    EmptyTable,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("correlation undefined: {0}")]
    DegenerateCorrelation(String),

    #[error("rank-deficient design matrix; dependent columns: {}", columns.join(", "))]
    Singular { columns: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown song id `{0}`")]
    Lookup(String),

    #[error("song ids missing from the joined dataset: {}", missing.join(", "))]
    Join { missing: Vec<String> },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported scheme: {0}")]
    UnsupportedScheme(String),

    #[error("corrupt cache file {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by numbers (NaN losses, singular fits) rather than inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::Singular { .. } | Error::Nn(NnError::NonFinite(_))
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
