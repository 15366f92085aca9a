//! Library side of the `packconv` command line tool.
//!
//! Each subcommand is a plain function returning its report so the
//! acceptance suite and integration tests can drive it without a process.

pub mod bench;
pub mod conv;
pub mod rng;
pub mod tensor_file;
pub mod throughput;
pub mod verify;

use std::fmt;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// An error carrying the exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<packconv::Error> for CliError {
    fn from(e: packconv::Error) -> Self {
        Self::usage(e.to_string())
    }
}

/// Pretty JSON with a trailing newline. Key order follows field order.
pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
