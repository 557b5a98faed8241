//! Diversity diagnostics: per-slot design-eigenvalue growth and the
//! block-diagonal-vs-full design sandwich, evaluated on live runs and
//! reported as JSON.

use crate::harness::config::{Algorithm, ExperimentConfig};
use crate::harness::runner::{run_seeds, SandwichSample, SeedRun, SANDWICH_LOOSE, SANDWICH_TIGHT};
use crate::harness::stats::{fit_line, SlotFit};
use crate::harness::HarnessError;

/// One eigenvalue sampling point: the minimum eigenvalue of every slot's
/// design matrix at round `t`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EigSample {
    pub t: u64,
    pub min_eigs: Vec<f64>,
}

/// How one sandwich band behaved over the sampled rounds.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BandReport {
    pub lo: f64,
    pub hi: f64,
    /// First sampled round where the band held, if any.
    pub first_hold_t: Option<u64>,
    /// True when the band held at every sampled round from `first_hold_t`
    /// onward.
    pub persists: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SeedDiag {
    pub seed: u64,
    /// Least-squares fit of each slot's minimum design eigenvalue over `t`.
    pub eig_fits: Vec<SlotFit>,
    pub eig_samples: Vec<EigSample>,
    pub sandwich_samples: Vec<SandwichSample>,
    pub tight_band: BandReport,
    pub loose_band: BandReport,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DiagReport {
    pub schema: &'static str,
    pub algorithm: String,
    pub slots: usize,
    pub dim: usize,
    pub items_per_slot: usize,
    pub horizon: u64,
    pub eig_every: u64,
    pub sandwich_every: u64,
    pub seeds: Vec<SeedDiag>,
}

pub const DIAG_SCHEMA: &str = "slate-glm diag v1";

fn band_report(samples: &[SandwichSample], lo: f64, hi: f64, tight: bool) -> BandReport {
    let holds = |s: &SandwichSample| if tight { s.tight_holds } else { s.loose_holds };
    let first_hold_t = samples.iter().find(|s| holds(s)).map(|s| s.t);
    let persists = match first_hold_t {
        None => false,
        Some(t0) => samples.iter().filter(|s| s.t >= t0).all(holds),
    };
    BandReport { lo, hi, first_hold_t, persists }
}

/// Build the per-seed diagnostic view of a finished run.
pub fn diagnose_seed(run: &SeedRun, slots: usize) -> SeedDiag {
    let mut eig_samples = Vec::new();
    let mut ts: Vec<Vec<f64>> = vec![Vec::new(); slots];
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); slots];
    for rec in &run.records {
        if let Some(eigs) = &rec.slot_min_eigs {
            eig_samples.push(EigSample { t: rec.t, min_eigs: eigs.clone() });
            for (slot, &eig) in eigs.iter().enumerate() {
                ts[slot].push(rec.t as f64);
                ys[slot].push(eig);
            }
        }
    }
    let eig_fits = (0..slots)
        .map(|slot| {
            let fit = fit_line(&ts[slot], &ys[slot]);
            SlotFit {
                slot: slot + 1,
                slope: fit.slope,
                correlation: fit.correlation,
                samples: ts[slot].len() as u64,
            }
        })
        .collect();
    SeedDiag {
        seed: run.seed,
        eig_fits,
        eig_samples,
        tight_band: band_report(&run.sandwich, SANDWICH_TIGHT.0, SANDWICH_TIGHT.1, true),
        loose_band: band_report(&run.sandwich, SANDWICH_LOOSE.0, SANDWICH_LOOSE.1, false),
        sandwich_samples: run.sandwich.clone(),
    }
}

/// Run the configured seeds and collect the diagnostics report. Requires a
/// learning algorithm and at least one sampling cadence switched on.
pub fn run_diagnostics(cfg: &ExperimentConfig) -> Result<DiagReport, HarnessError> {
    let mut errors = Vec::new();
    if cfg.algorithm == Algorithm::Random {
        errors.push(
            "algorithm: the random policy has no design matrices to diagnose".to_string(),
        );
    }
    if cfg.eig_every == 0 && cfg.sandwich_every == 0 {
        errors.push(
            "eig_every/sandwich_every: diagnostics need at least one sampling cadence > 0"
                .to_string(),
        );
    }
    if !errors.is_empty() {
        return Err(HarnessError::Config(errors));
    }

    let resolved = cfg
        .instance()
        .resolve()
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let runs = run_seeds(cfg, &resolved)?;
    Ok(DiagReport {
        schema: DIAG_SCHEMA,
        algorithm: cfg.algorithm.to_string(),
        slots: cfg.slots,
        dim: cfg.dim,
        items_per_slot: cfg.items_per_slot,
        horizon: cfg.horizon,
        eig_every: cfg.eig_every,
        sandwich_every: cfg.sandwich_every,
        seeds: runs.iter().map(|r| diagnose_seed(r, cfg.slots)).collect(),
    })
}
