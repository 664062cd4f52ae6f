use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("point lies behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("activation cache does not belong to the current parameters")]
    StaleCache,
    #[error("training diverged at iteration {0}")]
    Diverged(u64),
    #[error("scene generation failed: {0}")]
    Generation(String),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
