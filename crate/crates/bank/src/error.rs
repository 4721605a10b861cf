use thiserror::Error;

/// Errors returned by knowledge-bank operations.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum BankError {
    #[error("unknown namespace: {0}")]
    UnknownNamespace(String),

    #[error("dimension mismatch in namespace '{namespace}': expected {expected}, got {got}")]
    DimensionMismatch {
        namespace: String,
        expected: usize,
        got: usize,
    },

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    /// NaN/Inf in a vector or gradient; nothing non-finite enters the store.
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

/// Errors surfaced to bank clients: everything the bank itself can
/// report, plus the transport failures a remote connection adds. Timeout
/// is distinct so a trainer can skip a stale fetch and proceed instead of
/// blocking.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum ClientError {
    #[error(transparent)]
    Bank(#[from] BankError),

    #[error("request timed out")]
    Timeout,

    #[error("connection lost: {0}")]
    ConnectionLost(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}

impl ClientError {
    /// True for failures where retrying or skipping is reasonable
    /// (transport trouble), false for semantic rejections by the bank.
    pub fn is_transient(&self) -> bool {
        matches!(self, ClientError::Timeout | ClientError::ConnectionLost(_))
    }
}
