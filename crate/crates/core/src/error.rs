use std::io;

use thiserror::Error;

/// Coarse classification of failures, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Parse,
    Contract,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Contract(String),

    #[error("numerical degeneracy: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical(message.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => ErrorKind::Parse,
            Error::Contract(_) => ErrorKind::Contract,
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::Io(_) => ErrorKind::Io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
