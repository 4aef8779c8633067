use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid site metadata: {0}")]
    InvalidSite(String),
    #[error("no valid window in dataset")]
    EmptyDataset,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
