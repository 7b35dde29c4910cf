use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to load {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid graph: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("numeric failure at epoch {epoch}: {what}")]
    Numeric { epoch: usize, what: String },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

impl Error {
    /// Stamps the epoch onto a numeric error; other variants pass through.
    pub fn at_epoch(self, e: usize) -> Self {
        match self {
            Error::Numeric { what, .. } => Error::Numeric { epoch: e, what },
            other => other,
        }
    }
}
