//! Experiment drivers behind the `effham` binary.
//!
//! Configuration is a flat `key = value` file ([`config`]); every run writes
//! CSV tables and a `summary.json` into the output directory.

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{Experiment, ExperimentConfig, Method};
pub use experiments::{run, RunOutcome};

use crate::error::Error;

/// Process exit status for a finished run.
pub fn exit_code(result: &crate::Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) if o.failure.is_none() => 0,
        Ok(_) => 1,
        Err(e) => error_code(e),
    }
}

/// `2` for configuration problems, `1` for everything else.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::UnknownPreset(_) | Error::PresetDimension { .. } | Error::GridTooSmall(_) => 2,
        Error::InvalidParameter(_) | Error::Dimension(_) => 2,
        _ => 1,
    }
}
