//! Experiment runner: trace × oracle × policy × seed grids with per-slot
//! CSV output.

mod config;
mod run;

pub use config::{
    parse_seeds, parse_settings, parse_trace, AlphaSpec, ExperimentConfig, Mode, PolicyKind, SizeRange, Topology,
};
pub use run::{build_policy, run, run_experiment, simulate, write_csv, Environment, RunOutput, SeedData};

use std::path::PathBuf;

use thiserror::Error;

use crate::benchmark::BenchmarkError;
use crate::policies::PolicyError;
use crate::traces::TraceError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("policy {policy}, seed {seed}, slot {slot}: {source}")]
    Policy {
        policy: String,
        seed: u64,
        slot: u64,
        source: PolicyError,
    },
    #[error("policy {policy}, seed {seed}, slot {slot}: emitted an infeasible cache state")]
    Infeasible { policy: String, seed: u64, slot: u64 },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    /// Process exit code: 1 for configuration errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}
