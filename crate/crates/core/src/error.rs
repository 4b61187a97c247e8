use thiserror::Error;

use crate::classes::ClassViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signature mismatch: expected symbols {expected:?}, found {found:?}")]
    SignatureMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("index {index} out of range for a structure of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("structure is not a member of class {class}: {violation}")]
    NotInClass {
        class: String,
        violation: ClassViolation,
    },

    #[error("invalid node {0}: entry at position i must be at most i")]
    InvalidNode(String),

    #[error("chain too shallow: need level {needed}, chain depth is {depth}")]
    ChainTooShallow { needed: usize, depth: usize },

    #[error("copy is not diagonal: incomparable meets {first} and {second} share length {length}")]
    NonDiagonal {
        first: String,
        second: String,
        length: usize,
    },

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
