use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("record `{id}`: {msg}")]
    Record { id: String, msg: String },

    #[error("covariance is not positive definite after jitter {jitter:e} ({context})")]
    Singular { context: String, jitter: f64 },

    #[error("unsupported file version `{found}` (expected `{expected}`)")]
    Version { found: String, expected: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line tool: 1 validation, 2 I/O, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Singular { .. } => 3,
            _ => 1,
        }
    }

    /// Attach a record id to a numerical or validation failure.
    pub fn for_record(self, id: &str) -> Self {
        match self {
            Error::Singular { context, jitter } => Error::Singular {
                context: format!("record `{id}`: {context}"),
                jitter,
            },
            Error::Record { .. } | Error::Io { .. } | Error::Parse { .. } => self,
            other => Error::Record {
                id: id.to_string(),
                msg: other.to_string(),
            },
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
