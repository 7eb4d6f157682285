use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {left:?} vs {right:?} ({context})")]
    Shape {
        left: Vec<usize>,
        right: Vec<usize>,
        context: &'static str,
    },

    #[error("missing files: {0:?}")]
    Missing(Vec<PathBuf>),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
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

    pub(crate) fn shape(left: &[usize], right: &[usize], context: &'static str) -> Self {
        Error::Shape {
            left: left.to_vec(),
            right: right.to_vec(),
            context,
        }
    }
}
