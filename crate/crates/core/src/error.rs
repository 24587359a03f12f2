use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("statistical error: {0}")]
    Statistical(String),
    #[error("condition check failed: {0}")]
    ConditionFailed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
