use std::path::PathBuf;

use crate::format::FormatError;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad flags, unreadable or malformed input, invalid parameters.
pub const EXIT_INPUT: i32 = 2;
/// A computation failed to converge or produced non-finite values.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("config {path}: line {line}: {message}")]
    Config { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] conjunct_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use conjunct_core::Error as E;
        match self {
            CliError::Core(E::NumericalFailure { .. } | E::NoConvergence { .. }) => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        }
    }
}
