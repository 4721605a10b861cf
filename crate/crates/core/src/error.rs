use thiserror::Error;

/// Errors produced by the value types and codecs in this crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// NaN or infinity where the store only admits finite values.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("malformed payload: {0}")]
    MalformedPayload(String),
}

impl CoreError {
    pub fn malformed(msg: impl Into<String>) -> Self {
        CoreError::MalformedPayload(msg.into())
    }
}
