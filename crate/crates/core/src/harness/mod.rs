//! The `epdiff` experiment driver: configuration, commands and file output.

pub mod commands;
pub mod config;
pub mod snapshot;

use std::path::Path;

pub use commands::{execute, Report};
pub use config::{Command, DtRule, ExperimentConfig, ProfileKind, Settings};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Loads the optional config file, applies `flags` on top and resolves.
pub fn load(command: Command, file: Option<&Path>, flags: &Settings) -> Result<ExperimentConfig> {
    let base = match file {
        Some(p) => Settings::from_file(p)?,
        None => Settings::new(),
    };
    ExperimentConfig::resolve(command, &base.merged(flags))
}
