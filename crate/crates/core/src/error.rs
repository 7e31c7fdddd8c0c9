use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
///
/// The split between [`Error::Input`] and [`Error::Capacity`] is load-bearing:
/// the command-line front end maps them to distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The caller handed us something malformed or outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),
    /// The request is well-formed but exceeds the size an exhaustive routine supports.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A solver or internal routine failed in a way that is not the caller's fault.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Input(format!("malformed JSON: {err}"))
    }
}
