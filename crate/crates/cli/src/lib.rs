//! Command-line front end for the dual-layer driving simulator.
//!
//! Exit codes: 0 on success, 2 for configuration errors (bad values, unknown
//! names, out-of-range times), 3 for I/O errors (missing or unreadable files).

pub mod commands;
pub mod config;

pub use commands::{cmd_bench, cmd_encode, cmd_run, encode_at, simulate, BenchOutput, Outcome};
pub use config::{Overrides, Resolved, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}
