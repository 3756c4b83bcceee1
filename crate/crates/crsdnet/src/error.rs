use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum CrsdError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("duplicate review id `{id}` at line {line}")]
    DuplicateReview { id: String, line: usize },

    #[error("unknown id `{0}`")]
    UnknownId(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("graph too large for exact enumeration: {0} nodes (max 20)")]
    GraphTooLarge(usize),

    #[error("edge ({0}, {1}) has no probability assigned")]
    MissingEdgeProb(usize, usize),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CrsdError>;
