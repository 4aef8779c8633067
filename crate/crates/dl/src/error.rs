use heatcast_autograd::AutogradError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DlError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] heatcast_core::CoreError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<AutogradError> for DlError {
    fn from(e: AutogradError) -> Self {
        match e {
            AutogradError::Shape(m) | AutogradError::Graph(m) => DlError::Shape(m),
            AutogradError::Domain(m) => DlError::Domain(m),
            AutogradError::NonFinite(m) => DlError::Divergence(m),
        }
    }
}

pub type Result<T, E = DlError> = std::result::Result<T, E>;
