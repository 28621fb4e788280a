//! Configuration, scenario presets, run orchestration and cross-scale
//! comparison.

mod analysis;
mod coeffs;
mod config;
mod run;
mod scenario;

use thiserror::Error;

pub use analysis::{conversion_profile, count_peaks, front_decay_fit, linear_fit, pulse_speed_fit, Fit};
pub use coeffs::{coefficient_table, write_coefficient_csv, CoefficientRow};
pub use config::*;
pub use run::{compare, run, CompareRow, Comparison, FrameRow, Level, RunOptions, RunReport, Snapshot, AUDIT_TOL};
pub use scenario::InitialFields;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config value out of range: {0}")]
    Range(String),
    #[error("config refers to an invalid kernel: {0}")]
    Kernel(#[from] crate::kernels::KernelError),
    #[error("config describes an invalid grid: {0}")]
    Field(#[from] crate::fields::FieldError),
}

/// Process exit codes of the `swarm` binary.
pub mod exit {
    pub const CLEAN: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const AUDIT: i32 = 3;
    pub const SOLVER: i32 = 4;
}

/// Exit code for an error returned by [`run`] or [`compare`].
pub fn exit_code(e: &crate::Error) -> i32 {
    match e {
        crate::Error::Config(_) => exit::CONFIG,
        crate::Error::AtFrame { source, .. } => exit_code(source),
        _ => exit::SOLVER,
    }
}
