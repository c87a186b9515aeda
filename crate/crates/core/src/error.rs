use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments that violate an operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration document or flag combination is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Data was readable but has the wrong shape, length or values.
    #[error("data shape error: {0}")]
    Shape(String),

    #[error("stream `{0}` is constant and unsuitable for HSIC")]
    ConstantStream(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// An internal invariant was breached; indicates a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// `2` configuration/usage, `3` I/O, `4` data shape or parse, `5` internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) => 2,
            Error::Io { .. } => 3,
            Error::Shape(_) | Error::Parse { .. } | Error::ConstantStream(_) => 4,
            Error::Internal(_) => 5,
        }
    }
}
