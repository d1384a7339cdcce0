use thiserror::Error;

/// Errors raised by the inference pipeline.
#[derive(Debug, Error)]
pub enum AcoreError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AcoreError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(AcoreError::Domain(msg.into()))
}
