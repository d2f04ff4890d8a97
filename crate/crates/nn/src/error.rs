use thiserror::Error;

/// Errors raised by the network engine.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch in {layer}: expected {expected}, found {found}")]
    Dimension {
        layer: String,
        expected: String,
        found: String,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NnError {
    pub(crate) fn dim(layer: impl Into<String>, expected: impl ToString, found: impl ToString) -> Self {
        NnError::Dimension {
            layer: layer.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, NnError>;
