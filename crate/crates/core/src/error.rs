use thiserror::Error;

/// Errors raised by the library. Every variant carries enough context to
/// reproduce the offending call.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent configuration: {0}")]
    Divergent(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("mode {0:?} is not in the source lattice")]
    ModeOutside(Vec<i64>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
