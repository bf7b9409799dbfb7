use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical operation was evaluated outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or input document violates an invariant.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    /// A run produced a non-finite value, or some other failure during execution.
    #[error("runtime failure: {0}")]
    Runtime(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn domain(reason: impl Into<String>) -> Self {
        Error::Domain(reason.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Process exit status for this error: 2 for validation problems, 3 for
    /// runtime failures. Usage errors (exit 1) are reported by the argument
    /// parser before any of these can occur.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Runtime(_) => 3,
            _ => 2,
        }
    }
}
