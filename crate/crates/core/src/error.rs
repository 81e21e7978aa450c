//! Crate-wide error type.

/// Errors surfaced by any module in this crate.
///
/// The variants map onto the CLI exit-code convention: `Parse` and
/// `Validation` are caller-input problems (exit 3), `Io` and `Numeric` are
/// runtime failures (exit 4).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input file (JSON/CSV/checkpoint).
    #[error("parse error: {0}")]
    Parse(String),

    /// Input violated a documented invariant or precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Non-finite values or other numeric failure at run time.
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
