use thiserror::Error;

/// Errors raised across the toolkit. Variants map onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad parameters, non-finite quadrature nodes).
    #[error("configuration error: {0}")]
    Config(String),
    /// Caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// A numeric routine failed to converge or produced an undefined result.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// An exact enumeration would exceed its size guard.
    #[error("resource error: {0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
