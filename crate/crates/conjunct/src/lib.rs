//! File formats, output writers and the command-line front end for
//! `conjunct-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod output;

pub use error::{CliError, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK};
pub use format::{parse_conjunction, to_json, to_kvn, ConjunctionFile, Covariance, Format, FormatError, ObjectState};
