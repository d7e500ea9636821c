use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not satisfy a primitive's contract.
    #[error("{op}: incompatible shapes {shapes:?}")]
    Dimension {
        op: &'static str,
        shapes: Vec<Vec<usize>>,
    },

    /// An API precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid user-supplied data or configuration.
    #[error("invalid input: {0}")]
    Input(String),

    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A checkpoint file is truncated, corrupted, or of the wrong kind.
    #[error("{path}: bad checkpoint: {msg}")]
    Checkpoint { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn dim(op: &'static str, shapes: &[&[usize]]) -> Self {
        Error::Dimension {
            op,
            shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
