//! Library surface of the `decohist` binary: configuration parsing, report
//! assembly, and text rendering. Kept as a lib so integration tests exercise
//! the exact structs the binary serializes.

pub mod config;
pub mod report;

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation (missing or contradictory flags). Exit 1.
    Usage(String),
    /// Filesystem problems. Exit 1.
    Io(String),
    /// Malformed documents, parameters, or command names. Exit 1.
    Parse(String),
    /// The configured system fails a structural requirement. Exit 2.
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Parse(_) => 1,
            CliError::Validation(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
