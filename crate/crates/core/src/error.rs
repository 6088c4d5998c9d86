use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("insufficient history: need more than {needed} values, got {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
