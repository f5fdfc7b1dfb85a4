use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate weights: all case weights are zero")]
    DegenerateWeights,

    #[error("probability link is not defined for {0} loss")]
    UnsupportedLink(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("illegal state: {0}")]
    IllegalState(String),

    #[error("curvature degenerate at sample {index}: second derivative {value}")]
    CurvatureDegenerate { index: usize, value: f64 },

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors caused by bad user input (as opposed to failures while running).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::Json(_) => true,
            Error::Io { source, .. } => source.kind() == io::ErrorKind::NotFound,
            _ => false,
        }
    }
}
