use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad config, bad expression, or a violated precondition.
pub const EXIT_VALIDATION: i32 = 1;
/// Solver or I/O failure on a valid config.
pub const EXIT_NUMERIC: i32 = 2;
/// The run completed but a property, axiom or accuracy check failed.
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// `pointer` is a JSON pointer into the config document.
    #[error("config {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: gexpect::Error,
    },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub fn core(context: impl Into<String>) -> impl FnOnce(gexpect::Error) -> Self {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Read { .. } | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Write { .. } => EXIT_NUMERIC,
            CliError::Core { source, .. } => match source {
                gexpect::Error::RouteMismatch(_) => EXIT_CHECK_FAILED,
                e if e.is_numeric() => EXIT_NUMERIC,
                _ => EXIT_VALIDATION,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
