use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("duplicate document name `{0}`")]
    DuplicateName(String),

    #[error("no documents to index")]
    NoDocuments,

    #[error("incompatible indexes: {0}")]
    Incompatible(String),

    #[error("malformed index file: {0}")]
    Format(String),

    #[error("unsupported index file version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown hash scheme {0}")]
    UnknownHashScheme(u8),

    #[error("query has no terms (pattern shorter than q or every gram skipped)")]
    EmptyQuery,

    #[error("query has {0} distinct terms, beyond the score counter capacity")]
    QueryTooLong(usize),

    #[error("invalid DNA base {0:?}")]
    InvalidBase(char),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
