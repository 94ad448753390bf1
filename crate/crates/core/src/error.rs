use std::io;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("malformed {section} at byte offset {offset}: {message}")]
    Format {
        section: &'static str,
        offset: u64,
        message: String,
    },

    #[error("unsupported format version: {0}")]
    Version(String),

    #[error("build failed: {0}")]
    Build(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Coarse error classes, used for process exit codes and by foreign bindings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Internal,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Shape(_) | Error::Param(_) => ErrorCategory::Usage,
            Error::Data(_) | Error::Format { .. } | Error::Version(_) | Error::Io(_) => {
                ErrorCategory::Data
            }
            Error::Build(_) => ErrorCategory::Internal,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
