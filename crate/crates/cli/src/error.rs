use heatcast_core::CoreError;
use heatcast_dl::DlError;
use heatcast_eval::EvalError;
use heatcast_graybox::GrayboxError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(m) => CliError::Config(m),
            CoreError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<GrayboxError> for CliError {
    fn from(e: GrayboxError) -> Self {
        match e {
            GrayboxError::Numerical(_) | GrayboxError::Convergence(_) => CliError::Numerical(e.to_string()),
            GrayboxError::Core(c) => c.into(),
            GrayboxError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<DlError> for CliError {
    fn from(e: DlError) -> Self {
        match e {
            DlError::Divergence(_) | DlError::Domain(_) => CliError::Numerical(e.to_string()),
            DlError::Config(m) => CliError::Config(m),
            DlError::Core(c) => c.into(),
            DlError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(m) => CliError::Config(m),
            EvalError::Core(c) => c.into(),
            EvalError::Graybox(g) => g.into(),
            EvalError::Dl(d) => d.into(),
            EvalError::Csv(c) => c.into(),
            EvalError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}
