use eraserlab::central_spin::CentralSpinError;
use eraserlab::energy::ErasureError;
use eraserlab::engine::EngineError;
use eraserlab::maxent::MaxEntError;
use eraserlab::spin::SpinError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

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

impl From<ErasureError> for CliError {
    fn from(e: ErasureError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SpinError> for CliError {
    fn from(e: SpinError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MaxEntError> for CliError {
    fn from(e: MaxEntError) -> Self {
        match e {
            MaxEntError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CentralSpinError> for CliError {
    fn from(e: CentralSpinError) -> Self {
        match e {
            CentralSpinError::Dump(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::IncompleteCycle(_) => CliError::Numerical(e.to_string()),
            EngineError::Spin(s) => s.into(),
            EngineError::CentralSpin(c) => c.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
