use thiserror::Error;

/// Failure of a whole command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, manifest or inputs detected before any work; exit 2.
    #[error("{0}")]
    Usage(String),
    /// Some units of work failed; exit 1.
    #[error("{failed} of {total} items failed")]
    Partial { failed: usize, total: usize },
    /// Unexpected failure after work started; exit 1.
    #[error(transparent)]
    Core(#[from] pcrobust_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Partial { .. } | CliError::Core(_) => 1,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type CliResult<T> = Result<T, CliError>;
