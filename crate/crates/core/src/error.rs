use alloc::string::String;
use core::fmt;

/// Failure modes of the core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A state, input or parameter was NaN or infinite, or out of its domain.
    Domain(String),
    /// A configuration value is missing, malformed or inconsistent.
    Config(String),
    /// The Riccati solver could not produce a stabilizing solution.
    Lqr(String),
    /// An analysis was asked for on too little data.
    InsufficientData(String),
    /// An agent reply contained no JSON object.
    Parse(String),
    /// An agent reply had JSON that does not fit the role's schema.
    Schema(String),
    /// The agent backend could not deliver a reply (network, exhausted retries).
    Transport(String),
    /// A recorded transcript ran out of replies for a role.
    Replay(String),
}

impl Error {
    /// Failures that a re-prompt might fix.
    pub fn is_format(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Schema(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Lqr(m) => write!(f, "lqr error: {m}"),
            Error::InsufficientData(m) => write!(f, "insufficient data: {m}"),
            Error::Parse(m) => write!(f, "parse error: {m}"),
            Error::Schema(m) => write!(f, "schema error: {m}"),
            Error::Transport(m) => write!(f, "transport error: {m}"),
            Error::Replay(m) => write!(f, "replay error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}
