use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("duplicate key `{key}` on lines {first} and {second}")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("`{key}`: {source}")]
    Model { key: String, source: bathtub::Error },
    #[error(transparent)]
    Solver(#[from] bathtub::Error),
    #[error("{0}")]
    Sweep(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Invalid { key: key.to_string(), reason: reason.into() }
}
