use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A CSV record could not be turned into a row. `line` is 1-based and
    /// counts the header as line 1.
    #[error("line {line}, column `{column}`: {message}")]
    Csv {
        line: u64,
        column: String,
        message: String,
    },

    #[error("idx format: {0}")]
    Idx(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Validation errors are the caller's fault; I/O errors are the environment's.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
