//! Configuration, scenarios and CSV output for the `tripod` binary.

pub mod config;
pub mod csv;
pub mod scenarios;

pub use config::{Orientation, RunConfig, ScenarioName, KEYS_HELP};
pub use scenarios::{run, Output};

use crate::error::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PHYSICS: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Process exit status for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidLoop(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_PHYSICS,
    }
}
