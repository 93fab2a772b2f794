use std::fmt;

/// Errors raised by instance loading, solvers and oracles.
#[derive(Debug, Clone, PartialEq)]
pub enum SstError {
    /// Malformed or out-of-range input.
    Input(String),
    /// The requested computation exceeds a desk-scale limit.
    Capacity {
        what: &'static str,
        limit: usize,
        actual: usize,
    },
    /// An oracle or solver broke its declared contract.
    Contract(String),
}

impl SstError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Self::Contract(msg.into())
    }

    pub fn capacity(what: &'static str, limit: usize, actual: usize) -> Self {
        Self::Capacity {
            what,
            limit,
            actual,
        }
    }
}

impl fmt::Display for SstError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(msg) => write!(f, "input error: {msg}"),
            Self::Capacity {
                what,
                limit,
                actual,
            } => write!(f, "capacity error: {what} is {actual}, limit is {limit}"),
            Self::Contract(msg) => write!(f, "contract violation: {msg}"),
        }
    }
}

impl std::error::Error for SstError {}

pub type Result<T> = std::result::Result<T, SstError>;
