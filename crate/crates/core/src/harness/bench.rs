//! Per-round timing benchmark across a sweep of slot counts.
//!
//! Each (algorithm, slot-count) cell plays the configured horizon serially
//! — never in parallel, to avoid contention skew — with timing forced on.
//! The first `bench_discard_first` rounds are dropped from the statistics
//! as cache warm-up, and rounds that fed the refit history can optionally
//! be excluded too (`bench_exclude_warmup`). For enumerating baselines the
//! pull time includes slate enumeration when contexts change every round,
//! and excludes it for fixed item sets (enumerated once before the clock
//! starts); cells whose enumeration would exceed `enumeration_cap` are
//! marked infeasible and the sweep continues.

use std::path::Path;

use crate::env::ContextMode;
use crate::harness::config::{slate_count, Algorithm, ExperimentConfig};
use crate::harness::runner::{run_single, SeedRun};
use crate::harness::HarnessError;

#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchCell {
    pub algorithm: String,
    pub slots: usize,
    /// Rounds contributing to the statistics after discards/exclusions.
    pub rounds_measured: u64,
    pub avg_pull_ns: f64,
    pub max_pull_ns: u64,
    pub avg_update_ns: f64,
    pub max_update_ns: u64,
    /// True when the cell was skipped because the baseline would have to
    /// enumerate more slates than `enumeration_cap`.
    pub infeasible: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct BenchTable {
    pub schema: &'static str,
    pub items_per_slot: usize,
    pub dim: usize,
    pub horizon: u64,
    pub seed: u64,
    pub discarded_rounds: u64,
    pub warmup_excluded: bool,
    pub cells: Vec<BenchCell>,
}

pub const BENCH_SCHEMA: &str = "slate-glm bench v1";
pub const BENCH_CSV_SCHEMA_LINE: &str = "# slate-glm bench csv schema v1";

fn infeasible_cell(algorithm: Algorithm, slots: usize) -> BenchCell {
    BenchCell {
        algorithm: algorithm.to_string(),
        slots,
        rounds_measured: 0,
        avg_pull_ns: 0.0,
        max_pull_ns: 0,
        avg_update_ns: 0.0,
        max_update_ns: 0,
        infeasible: true,
    }
}

fn measure_cell(
    algorithm: Algorithm,
    slots: usize,
    run: &SeedRun,
    discard_first: u64,
    exclude_warmup: bool,
) -> BenchCell {
    let kept: Vec<_> = run
        .records
        .iter()
        .skip(discard_first as usize)
        .filter(|r| !(exclude_warmup && r.warmup_round))
        .collect();
    let n = kept.len() as u64;
    let (avg_pull_ns, avg_update_ns) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            kept.iter().map(|r| r.pull_ns).sum::<u64>() as f64 / n as f64,
            kept.iter().map(|r| r.update_ns).sum::<u64>() as f64 / n as f64,
        )
    };
    BenchCell {
        algorithm: algorithm.to_string(),
        slots,
        rounds_measured: n,
        avg_pull_ns,
        max_pull_ns: kept.iter().map(|r| r.pull_ns).max().unwrap_or(0),
        avg_update_ns,
        max_update_ns: kept.iter().map(|r| r.update_ns).max().unwrap_or(0),
        infeasible: false,
    }
}

/// Run the timing sweep: every configured benchmark algorithm at every slot
/// count, one seed each (the first in the config's seed list), serially.
pub fn run_timing_bench(
    cfg: &ExperimentConfig,
    slot_range: &[usize],
) -> Result<BenchTable, HarnessError> {
    if slot_range.is_empty() {
        return Err(HarnessError::Config(vec![
            "slots: the benchmark needs at least one slot count".to_string(),
        ]));
    }
    if slot_range.iter().any(|&n| n == 0) {
        return Err(HarnessError::Config(vec![
            "slots: slot counts must be at least 1".to_string(),
        ]));
    }
    let seed = cfg.seeds[0];
    let mut cells = Vec::new();
    for &slots in slot_range {
        for &algorithm in &cfg.bench_algorithms {
            if algorithm.is_baseline()
                && slate_count(cfg.items_per_slot, slots) > cfg.enumeration_cap as u128
            {
                cells.push(infeasible_cell(algorithm, slots));
                continue;
            }
            let mut cell_cfg = cfg.clone();
            cell_cfg.algorithm = algorithm;
            cell_cfg.slots = slots;
            cell_cfg.record_timing = true;
            // Diagnostics off inside timing cells; they are not part of a
            // round's pull/update work.
            cell_cfg.eig_every = 0;
            cell_cfg.sandwich_every = 0;
            let resolved = cell_cfg
                .instance()
                .resolve()
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            let prebuilt = if algorithm.is_baseline() && cfg.mode == ContextMode::Fixed {
                let mut throwaway = crate::rng::SplitMix64::new(0);
                let sets = resolved.itemsets_for_round(&mut throwaway);
                Some(
                    crate::bandit::enumerate_slates(sets.as_ref(), cell_cfg.enumeration_cap)
                        .map_err(|e| HarnessError::Runtime(e.to_string()))?,
                )
            } else {
                None
            };
            let run = run_single(&cell_cfg, &resolved, seed, prebuilt.as_deref())?;
            cells.push(measure_cell(
                algorithm,
                slots,
                &run,
                cfg.bench_discard_first,
                cfg.bench_exclude_warmup,
            ));
        }
    }
    Ok(BenchTable {
        schema: BENCH_SCHEMA,
        items_per_slot: cfg.items_per_slot,
        dim: cfg.dim,
        horizon: cfg.horizon,
        seed,
        discarded_rounds: cfg.bench_discard_first,
        warmup_excluded: cfg.bench_exclude_warmup,
        cells,
    })
}

pub fn render_bench_csv(table: &BenchTable) -> String {
    let mut out = String::new();
    out.push_str(BENCH_CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str(
        "algorithm,slots,rounds_measured,avg_pull_ns,max_pull_ns,avg_update_ns,max_update_ns,infeasible\n",
    );
    for c in &table.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.algorithm,
            c.slots,
            c.rounds_measured,
            c.avg_pull_ns,
            c.max_pull_ns,
            c.avg_update_ns,
            c.max_update_ns,
            c.infeasible,
        ));
    }
    out
}

pub fn write_bench_csv(table: &BenchTable, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, render_bench_csv(table))
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}
