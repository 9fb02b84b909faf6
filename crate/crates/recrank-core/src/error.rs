//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{count} malformed rows in {path} exceeds threshold {threshold}")]
    TooManyBadRows {
        path: String,
        count: usize,
        threshold: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown user: {0}")]
    UnknownUser(String),

    #[error("unknown item: {0}")]
    UnknownItem(String),

    #[error("missing title for item {0}")]
    MissingTitle(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("backend request failed after {attempts} attempts: {message}")]
    BackendFailed { attempts: u32, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
