use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes do not fit together.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A precondition on argument values was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An artifact file could not be decoded.
    #[error("failed to load {path}: field `{field}`: {message}")]
    Load {
        path: PathBuf,
        field: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(
        path: impl Into<PathBuf>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Load {
            path: path.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
