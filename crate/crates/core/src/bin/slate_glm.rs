//! Command-line front end for the slate bandit experiment harness.
//!
//! Subcommands: `run` (regret experiment), `bench` (slot-sweep timing),
//! `diag` (design-matrix diagnostics), `aggregate` (merge per-seed CSVs
//! into plot data). Exit codes: 0 success, 2 configuration error, 3
//! runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slate_glm::harness::{
    emit_plot_data, run_diagnostics, run_experiment, run_timing_bench, write_bench_csv,
    ExperimentConfig, HarnessError,
};

#[derive(Parser)]
#[command(
    name = "slate-glm",
    about = "Logistic slate bandit experiments: regret, timing, diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured regret experiment over all seeds.
    Run {
        /// Path to a key = value config file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Time every benchmark algorithm across a sweep of slot counts.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Slot counts to sweep, comma-separated (e.g. 3,4,5).
        #[arg(long, value_delimiter = ',', required = true)]
        slots: Vec<usize>,
    },
    /// Run eigenvalue-growth and design-sandwich diagnostics.
    Diag {
        #[arg(long)]
        config: PathBuf,
    },
    /// Merge per-seed run CSVs into a long-format plot CSV.
    Aggregate {
        /// Output path for the merged CSV.
        #[arg(long)]
        out: PathBuf,
        /// Per-seed CSV files from one or more runs of the same shape.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, HarnessError> {
    ExperimentConfig::from_file(path)
}

fn write_json(
    path: &std::path::Path,
    value: &impl serde::Serialize,
) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    std::fs::write(path, format!("{json}\n"))
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let output = run_experiment(&cfg)?;
            println!("run directory: {}", output.run_dir.display());
            println!("seeds: {}", output.summary.seed_count);
            if let (Some(cp), Some(mean)) =
                (output.summary.checkpoints.last(), output.summary.regret_mean.last())
            {
                println!("mean cumulative regret at t={cp}: {mean:.4}");
            }
            println!("summary: {}", output.summary_path.display());
        }
        Command::Bench { config, slots } => {
            let cfg = load_config(&config)?;
            let table = run_timing_bench(&cfg, &slots)?;
            let run_dir =
                slate_glm::harness::runner::create_run_dir(&cfg.out_dir, &cfg.hash8())?;
            let csv_path = run_dir.join("bench.csv");
            write_bench_csv(&table, &csv_path)?;
            println!(
                "{:<22} {:>5} {:>9} {:>14} {:>14} {:>14} {:>14}",
                "algorithm", "slots", "rounds", "avg_pull_ns", "max_pull_ns", "avg_update_ns",
                "max_update_ns"
            );
            for c in &table.cells {
                if c.infeasible {
                    println!("{:<22} {:>5} {:>9}", c.algorithm, c.slots, "infeasible");
                } else {
                    println!(
                        "{:<22} {:>5} {:>9} {:>14.0} {:>14} {:>14.0} {:>14}",
                        c.algorithm,
                        c.slots,
                        c.rounds_measured,
                        c.avg_pull_ns,
                        c.max_pull_ns,
                        c.avg_update_ns,
                        c.max_update_ns
                    );
                }
            }
            println!("bench table: {}", csv_path.display());
        }
        Command::Diag { config } => {
            let cfg = load_config(&config)?;
            let report = run_diagnostics(&cfg)?;
            let run_dir =
                slate_glm::harness::runner::create_run_dir(&cfg.out_dir, &cfg.hash8())?;
            let path = run_dir.join("diag.json");
            write_json(&path, &report)?;
            let fmt_t = |t: Option<u64>| t.map_or_else(|| "never".to_string(), |v| v.to_string());
            for seed in &report.seeds {
                for fit in &seed.eig_fits {
                    println!(
                        "seed {} slot {}: min-eig slope {:.6}, correlation {:.4} ({} samples)",
                        seed.seed, fit.slot, fit.slope, fit.correlation, fit.samples
                    );
                }
                println!(
                    "seed {}: tight band first holds at {} (persists: {}), \
                     loose band first holds at {} (persists: {})",
                    seed.seed,
                    fmt_t(seed.tight_band.first_hold_t),
                    seed.tight_band.persists,
                    fmt_t(seed.loose_band.first_hold_t),
                    seed.loose_band.persists
                );
            }
            println!("diagnostics: {}", path.display());
        }
        Command::Aggregate { out, files } => {
            emit_plot_data(&files, &out)?;
            println!("plot data: {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
