use std::path::PathBuf;

use crate::TokenId;

/// Errors produced by the tokenizer, surgery and evaluation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The input does not follow the expected file layout.
    #[error("format error: {0}")]
    Format(String),

    /// The input parses but violates a structural invariant.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown token id {0}")]
    UnknownId(TokenId),

    #[error("unknown token {0:?}")]
    UnknownToken(String),

    #[error("decoded bytes are not valid UTF-8 (first invalid byte at offset {offset})")]
    InvalidUtf8 { offset: usize },

    #[error("configuration error: {0}")]
    Config(String),

    /// Not enough unprotected tokens to evict for the requested budget.
    #[error("capacity error: budget {requested} exceeds the {available} evictable tokens (max feasible budget is {available})")]
    Capacity { requested: usize, available: usize },

    #[error("degenerate embedding direction for token {0:?}: constituent mean has zero norm")]
    DegenerateDirection(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 configuration, 3 input/format,
    /// 4 capacity/integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. }
            | Error::Format(_)
            | Error::UnknownId(_)
            | Error::UnknownToken(_)
            | Error::InvalidUtf8 { .. }
            | Error::Shape(_) => 3,
            Error::Integrity(_)
            | Error::Capacity { .. }
            | Error::DegenerateDirection(_)
            | Error::Domain(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
