use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An operation was asked to do something the book or model forbids
    /// (cancel on an empty queue, market order away from the best, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("model is unstable: spectral radius {0:.6} >= 1")]
    Unstable(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the caller's inputs rather than by the environment.
    pub fn is_contract_violation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Numerical(_))
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Range(_) => "range",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::ContractViolation(_) => "contract_violation",
            Error::Unstable(_) => "unstable_model",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Numerical(_) => "numerical",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn violation(msg: impl Into<String>) -> Error {
    Error::ContractViolation(msg.into())
}
