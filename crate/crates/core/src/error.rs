use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("parameter vector must have at least one entry")]
    EmptyParams,

    #[error("non-finite parameters or gradient (diverged)")]
    Diverged,

    #[error("gradient is zero; the SAM update is undefined for rho > 0")]
    ZeroGradient,

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("bisection could not bracket the loss-change sign flip")]
    Bracketing,

    #[error("spectral estimate is empty")]
    EmptyEstimate,

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("log error: {0}")]
    Log(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
