use thiserror::Error;

/// Errors returned by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spreading factor {0} is out of range (expected 2..=16)")]
    InvalidSpreadingFactor(u32),

    #[error("symbol {value} is out of range for M = {m}")]
    SymbolOutOfRange { value: usize, m: usize },

    #[error("buffer length {actual} does not match M = {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("tap delay {delay} must be smaller than M = {m}")]
    DelayTooLarge { delay: usize, m: usize },

    #[error("invalid value for `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("covariance matrix is not Hermitian positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
