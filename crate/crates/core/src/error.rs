use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An unsupported or inconsistent model configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A call-site argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A numerical procedure produced an unusable result.
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
