//! Experiment harness: config parsing, seeded experiment execution with
//! CSV/JSON outputs, the slot-sweep timing benchmark, design-matrix
//! diagnostics, and cross-seed plot-data aggregation.
//!
//! The CLI binary is a thin shell over this module; everything here is
//! callable in-process so tests and downstream tools can run experiments
//! without spawning processes.

pub mod aggregate;
pub mod bench;
pub mod config;
pub mod diag;
pub mod runner;
pub mod stats;

pub use aggregate::{emit_plot_data, render_plot_data, PLOT_CSV_SCHEMA_LINE};
pub use bench::{render_bench_csv, run_timing_bench, write_bench_csv, BenchCell, BenchTable};
pub use config::{Algorithm, ExperimentConfig, TauSetting};
pub use diag::{run_diagnostics, DiagReport, SeedDiag};
pub use runner::{
    checkpoints, run_experiment, run_seeds, run_single, summarize, ExperimentOutput,
    RunSummary, SandwichSample, SeedRun, SeedSummary,
};

use std::path::PathBuf;

/// Failures surfaced by the harness, split by how the CLI should exit:
/// configuration problems exit 2, everything else exits 3.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error{}:\n  {}", if .0.len() == 1 { "" } else { "s" }, .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    /// CLI exit code: 2 for configuration errors, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io { .. } | HarnessError::Runtime(_) => 3,
        }
    }
}
