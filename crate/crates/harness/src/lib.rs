//! Scenario runner for the vibratory finger simulator: single runs, paired
//! Monte-Carlo benchmarks, frequency sweeps and feasibility tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod commands;
pub mod scenario;

use thiserror::Error;

pub use bench::{run_bench, BenchReport, MeanStd};
pub use commands::{
    bench, feasibility, simulate, sweep_freq, BenchOptions, CommonOptions, GridSpec,
};
pub use scenario::{load, load_str, ConfigError, Loaded, Override, Resolved, Scenario};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_FAULT: u8 = 3;
pub const EXIT_CHECK: u8 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid argument `{arg}`: {reason}")]
    Usage { arg: String, reason: String },
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) | HarnessError::Usage { .. } => EXIT_CONFIG,
            HarnessError::Output { .. } => EXIT_FAULT,
        }
    }
}
