use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] sam_edge::Error),

    #[error("{0}")]
    Verification(String),
}

impl CliError {
    /// 0 success, 1 validation or usage, 2 I/O, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                sam_edge::Error::Io(_) | sam_edge::Error::Dataset(_) | sam_edge::Error::Log(_) => 2,
                _ => 1,
            },
            CliError::Verification(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
