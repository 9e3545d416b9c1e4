use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LireError {
    #[error("token id {token} is out of range for vocabulary of size {vocab_size}")]
    InvalidToken { token: usize, vocab_size: usize },

    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("enumeration too large: {count} sequences exceed the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("finite-difference oracle failed: {0}")]
    Oracle(String),

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
}

pub type Result<T> = std::result::Result<T, LireError>;

impl LireError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LireError::Io {
            path: path.into(),
            source,
        }
    }
}
