//! CLI error type and its mapping onto process exit codes.
//!
//! Exit codes: 0 success, 2 usage (bad invocation), 3 validation (input
//! violated a precondition or failed to parse), 4 runtime (I/O or numeric
//! failure). Argument-syntax errors never reach this type — clap reports
//! them itself and exits with 2.

use std::fmt;

use trajsynth_core::Error as CoreError;

/// Anything that can abort a subcommand.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation shape: missing required flag, conflicting modes, or a
    /// config file written by a different subcommand.
    Usage(String),
    /// Failure propagated from the library; the exit code follows the error
    /// class.
    Core(CoreError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(CoreError::Parse(_) | CoreError::Validation(_)) => 3,
            CliError::Core(CoreError::Io(_) | CoreError::Numeric(_)) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(CoreError::from(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(CoreError::from(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_error_class() {
        assert_eq!(CliError::usage("x").exit_code(), 2);
        assert_eq!(
            CliError::from(CoreError::validation("v")).exit_code(),
            3
        );
        assert_eq!(CliError::from(CoreError::parse("p")).exit_code(), 3);
        assert_eq!(
            CliError::from(CoreError::numeric("n")).exit_code(),
            4
        );
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::from(io).exit_code(), 4);
    }

    #[test]
    fn display_prefixes_usage_errors() {
        let e = CliError::usage("--out <DIR> is required");
        assert_eq!(e.to_string(), "usage error: --out <DIR> is required");
        let c = CliError::from(CoreError::validation("bad"));
        assert_eq!(c.to_string(), "validation error: bad");
    }
}
