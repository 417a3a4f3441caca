use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, the learner and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("audio format error: {0}")]
    Format(String),
    #[error("empty audio clip: {0}")]
    EmptyClip(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("config line {line}: {message}")]
    ConfigLine { line: usize, message: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    NonFinite(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("session error: {0}")]
    Session(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
