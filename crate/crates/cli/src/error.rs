use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// Outputs were written, but the run did not converge or failed a
    /// diagnostic check.
    #[error("{0}")]
    Convergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse { path: path.into(), message: message.to_string() }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}

validation_from!(eis_bayes::EcmError, eis_bayes::ProbError, eis_bayes::SignalError, eis_bayes::McmcError);

impl From<eis_bayes::VbError> for CliError {
    fn from(e: eis_bayes::VbError) -> Self {
        match e {
            eis_bayes::VbError::NonFiniteElbo { .. } => CliError::Convergence(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}
