use thiserror::Error;

/// Errors raised by the solvers and the experiment driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeliosError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent grid sizes, odd Simpson counts, bad config keys.
    #[error("configuration error: {0}")]
    Config(String),
    /// Breakdown of a numerical kernel (factorization, pivots, non-finite values).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Input data violating a structural requirement, e.g. an asymmetric matrix.
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HeliosError {
    fn from(err: std::io::Error) -> Self {
        HeliosError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HeliosError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(HeliosError::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(HeliosError::Config(msg.into()))
}
