use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Instance or channel data violates a structural invariant.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("exhaustive search needs {required} assignments, above the cap of {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    /// A node or iteration cap stopped a solve before it produced a point.
    #[error("solver limit reached: {0}")]
    Limit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
