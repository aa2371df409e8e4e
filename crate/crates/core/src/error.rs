use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed extraction: {0}")]
    MalformedExtraction(String),

    #[error("invalid token {0:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("labeling has length {got}, expected {expected}")]
    LabelingLength { expected: usize, got: usize },

    #[error("exhaustive search refused for {0} variables (limit {1})")]
    TooManyVariables(usize, usize),

    #[error("invalid pseudo-boolean term: {0}")]
    InvalidTerm(String),

    #[error("empty gold set")]
    EmptyGold,

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
