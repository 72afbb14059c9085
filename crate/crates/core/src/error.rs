use thiserror::Error;

/// Errors raised anywhere in the drift-detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("input too short: need at least {needed} elements, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("value out of domain: {0}")]
    OutOfDomain(String),

    #[error("model is empty: {0}")]
    EmptyModel(&'static str),

    #[error("training failed: {0}")]
    Training(String),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
