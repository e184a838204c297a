use thiserror::Error;

/// Errors produced by the library.
///
/// `Domain` marks arguments outside a function's mathematical domain,
/// `Parse`/`Validation` mark malformed hypothesis strings or inconsistent
/// inputs, and `Numeric` marks a computation that failed to converge or
/// produced an unusable value (the message carries the diagnostic).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn numeric(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
