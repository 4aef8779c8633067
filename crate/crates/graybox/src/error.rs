use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrayboxError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("convergence error: {0}")]
    Convergence(String),
    #[error(transparent)]
    Core(#[from] heatcast_core::CoreError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GrayboxError> = std::result::Result<T, E>;
