//! Experiment execution: one learner per seed, seeds fanned out over a
//! worker pool, per-round CSV logs, and a cross-seed summary.
//!
//! Determinism contract: every random draw comes from a named stream keyed
//! by `(instance_seed, seed, purpose)`, and context/reward streams are
//! consumed identically by every algorithm (one reward draw per round, a
//! fixed number of context draws per round), so runs with different
//! algorithms but equal seeds see the same environment. With
//! `record_timing = false` (the default) the timing columns are written as
//! zero, making output files byte-identical across machines and re-runs.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::bandit::{
    baseline_step, enumerate_slates, random_select, step_ofu, step_ts, BaselineMode,
    OnlineState, Slate, TsFixedLearner, TsFixedParams,
};
use crate::bandit::LearnerParams;
use crate::env::{ContextMode, ResolvedInstance, RoundRecord};
use crate::glm::ScalarSchedule;
use crate::harness::config::{Algorithm, ExperimentConfig};
use crate::harness::stats::{fit_line, mean_sd, SlotFit};
use crate::harness::HarnessError;
use crate::linalg::{block_diag, min_eigenvalue, psd_sandwich_check, SymMatrix};
use crate::rng::{SplitMix64, TAG_CONTEXT, TAG_LEARNER, TAG_REWARD};

/// The multiplicative sandwich bands checked between the block-diagonal
/// slot design and the full slate design: a tight band and a loose band.
pub const SANDWICH_TIGHT: (f64, f64) = (0.75, 1.25);
pub const SANDWICH_LOOSE: (f64, f64) = (0.5, 1.5);

/// One sandwich evaluation: does `lo*U <= W <= hi*U` hold (PSD order) with
/// `U = blockdiag(W^1..W^N)`, and by what eigenvalue margins.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SandwichSample {
    pub t: u64,
    pub tight_holds: bool,
    pub tight_margin_lo: f64,
    pub tight_margin_hi: f64,
    pub loose_holds: bool,
    pub loose_margin_lo: f64,
    pub loose_margin_hi: f64,
}

/// Everything one seed produced, kept in memory for summarizing and tests.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub sandwich: Vec<SandwichSample>,
}

impl SeedRun {
    pub fn final_cumulative_regret(&self) -> f64 {
        self.records.iter().map(|r| r.regret_increment).sum()
    }

    pub fn warmup_rounds(&self) -> u64 {
        self.records.iter().filter(|r| r.warmup_round).count() as u64
    }

    pub fn cumulative_regret_at(&self, t: u64) -> f64 {
        self.records.iter().take(t as usize).map(|r| r.regret_increment).sum()
    }
}

enum Learner {
    Slotwise(Box<OnlineState>),
    TsFixed(Box<TsFixedLearner>),
    Baseline(Box<OnlineState>),
    Random { t: u64 },
}

impl Learner {
    fn state(&self) -> Option<&OnlineState> {
        match self {
            Learner::Slotwise(s) | Learner::Baseline(s) => Some(s),
            Learner::TsFixed(l) => Some(l.state()),
            Learner::Random { .. } => None,
        }
    }
}

fn runtime(err: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(err.to_string())
}

fn learner_params(
    cfg: &ExperimentConfig,
    resolved: &ResolvedInstance,
) -> Result<LearnerParams, HarnessError> {
    let schedule = ScalarSchedule::new(
        cfg.c_eta,
        cfg.c_gamma,
        cfg.c_beta,
        resolved.s,
        resolved.slots(),
        resolved.dim(),
        cfg.delta,
    )
    .map_err(runtime)?;
    Ok(LearnerParams {
        schedule,
        s: resolved.s,
        kappa: resolved.kappa,
        ts_scale: cfg.ts_scale,
        solver_max_iter: cfg.solver_max_iter,
        rejection_cap: cfg.rejection_cap,
        refresh_every: cfg.refresh_every,
    })
}

fn build_learner(
    cfg: &ExperimentConfig,
    resolved: &ResolvedInstance,
) -> Result<Learner, HarnessError> {
    let slots = resolved.slots();
    let dim = resolved.dim();
    match cfg.algorithm {
        Algorithm::Random => Ok(Learner::Random { t: 1 }),
        Algorithm::SlateGlmOfu | Algorithm::SlateGlmTs => {
            let state =
                OnlineState::new(slots, dim, learner_params(cfg, resolved)?).map_err(runtime)?;
            Ok(Learner::Slotwise(Box::new(state)))
        }
        Algorithm::BaselineOfu | Algorithm::BaselineTs => {
            let state =
                OnlineState::new(slots, dim, learner_params(cfg, resolved)?).map_err(runtime)?;
            Ok(Learner::Baseline(Box::new(state)))
        }
        Algorithm::SlateGlmTsFixed => {
            let tau = cfg.tau.resolve(slots, dim, cfg.horizon);
            if tau >= cfg.horizon {
                return Err(HarnessError::Runtime(format!(
                    "forced warm-up of {tau} rounds leaves no sampling rounds within \
                     horizon = {}",
                    cfg.horizon
                )));
            }
            let params = TsFixedParams {
                base: learner_params(cfg, resolved)?,
                tau,
                lambda_reg: cfg.lambda_reg,
            };
            let learner = TsFixedLearner::new(slots, dim, params).map_err(runtime)?;
            Ok(Learner::TsFixed(Box::new(learner)))
        }
    }
}

fn per_slot_min_eigs(state: &OnlineState) -> Result<Vec<f64>, HarnessError> {
    state
        .w_slots
        .iter()
        .map(|m| min_eigenvalue(m.matrix()).map_err(runtime))
        .collect()
}

fn sample_sandwich(t: u64, state: &OnlineState) -> Result<SandwichSample, HarnessError> {
    let blocks: Vec<&SymMatrix> = state.w_slots.iter().map(|m| m.matrix()).collect();
    let u = block_diag(&blocks).map_err(runtime)?;
    let (tight_holds, tight_margin_lo, tight_margin_hi) =
        psd_sandwich_check(&u, state.w.matrix(), SANDWICH_TIGHT.0, SANDWICH_TIGHT.1)
            .map_err(runtime)?;
    let (loose_holds, loose_margin_lo, loose_margin_hi) =
        psd_sandwich_check(&u, state.w.matrix(), SANDWICH_LOOSE.0, SANDWICH_LOOSE.1)
            .map_err(runtime)?;
    Ok(SandwichSample {
        t,
        tight_holds,
        tight_margin_lo,
        tight_margin_hi,
        loose_holds,
        loose_margin_lo,
        loose_margin_hi,
    })
}

/// Play all rounds for one seed. `prebuilt` carries the enumerated slate
/// list for baselines on fixed item sets (built once, shared across seeds).
pub fn run_single(
    cfg: &ExperimentConfig,
    resolved: &ResolvedInstance,
    seed: u64,
    prebuilt: Option<&[Slate]>,
) -> Result<SeedRun, HarnessError> {
    let mut ctx_rng = SplitMix64::run_stream(cfg.instance_seed, seed, TAG_CONTEXT);
    let mut reward_rng = SplitMix64::run_stream(cfg.instance_seed, seed, TAG_REWARD);
    let mut learner_rng = SplitMix64::run_stream(cfg.instance_seed, seed, TAG_LEARNER);

    let mut learner = build_learner(cfg, resolved)?;
    let mut records = Vec::with_capacity(cfg.horizon as usize);
    let mut sandwich = Vec::new();

    for _ in 0..cfg.horizon {
        let sets_cow = resolved.itemsets_for_round(&mut ctx_rng);
        let sets = sets_cow.as_ref();
        let mut reward_fn = |slate: &Slate, indices: &[usize]| {
            let _ = slate;
            let z = resolved.slate_dot(sets, indices);
            let y = resolved.sample_reward(z, &mut reward_rng);
            let regret = resolved.regret_increment(sets, indices);
            (y, regret)
        };

        let mut rec = match &mut learner {
            Learner::Slotwise(state) => match cfg.algorithm {
                Algorithm::SlateGlmOfu => step_ofu(state, sets, reward_fn).map_err(runtime)?,
                Algorithm::SlateGlmTs => {
                    step_ts(state, sets, &mut learner_rng, reward_fn).map_err(runtime)?
                }
                _ => unreachable!("slotwise learner built only for slotwise algorithms"),
            },
            Learner::TsFixed(l) => {
                l.step(sets, &mut learner_rng, reward_fn).map_err(runtime)?
            }
            Learner::Baseline(state) => {
                let mode = match cfg.algorithm {
                    Algorithm::BaselineOfu => BaselineMode::Ofu,
                    Algorithm::BaselineTs => BaselineMode::Ts,
                    _ => unreachable!("baseline learner built only for baseline algorithms"),
                };
                baseline_step(
                    state,
                    sets,
                    prebuilt,
                    cfg.enumeration_cap,
                    mode,
                    &mut learner_rng,
                    reward_fn,
                )
                .map_err(runtime)?
            }
            Learner::Random { t } => {
                let round = *t;
                let pull_start = Instant::now();
                let sel = random_select(sets, &mut learner_rng).map_err(runtime)?;
                let pull_ns = pull_start.elapsed().as_nanos() as u64;
                let (reward, regret) = reward_fn(&sel.slate, &sel.indices);
                *t += 1;
                RoundRecord {
                    t: round,
                    slot_indices: sel.indices,
                    reward,
                    regret_increment: regret,
                    pull_ns,
                    update_ns: 0,
                    warmup_round: false,
                    rejection_count: 0,
                    slot_min_eigs: None,
                }
            }
        };

        if !cfg.record_timing {
            rec.pull_ns = 0;
            rec.update_ns = 0;
        }
        if cfg.eig_every > 0 && rec.t % cfg.eig_every == 0 {
            if let Some(state) = learner.state() {
                rec.slot_min_eigs = Some(per_slot_min_eigs(state)?);
            }
        }
        if cfg.sandwich_every > 0 && rec.t % cfg.sandwich_every == 0 {
            if let Some(state) = learner.state() {
                sandwich.push(sample_sandwich(rec.t, state)?);
            }
        }
        records.push(rec);
    }

    Ok(SeedRun { seed, records, sandwich })
}

/// Run every configured seed, in parallel, returning results in seed-list
/// order regardless of completion order.
pub fn run_seeds(
    cfg: &ExperimentConfig,
    resolved: &ResolvedInstance,
) -> Result<Vec<SeedRun>, HarnessError> {
    let prebuilt: Option<Vec<Slate>> =
        if cfg.algorithm.is_baseline() && cfg.mode == ContextMode::Fixed {
            let mut throwaway = SplitMix64::new(0);
            let sets = resolved.itemsets_for_round(&mut throwaway);
            Some(enumerate_slates(sets.as_ref(), cfg.enumeration_cap).map_err(runtime)?)
        } else {
            None
        };

    let n = cfg.seeds.len();
    let workers = std::thread::available_parallelism()
        .map(usize::from)
        .unwrap_or(1)
        .min(n)
        .max(1);

    if workers == 1 {
        return cfg
            .seeds
            .iter()
            .map(|&seed| run_single(cfg, resolved, seed, prebuilt.as_deref()))
            .collect();
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<SeedRun, HarnessError>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = run_single(cfg, resolved, cfg.seeds[i], prebuilt.as_deref());
                *slots[i].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("result slot poisoned").expect("worker filled every slot"))
        .collect()
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

/// Rounds at which cross-seed statistics are reported: powers of two up to
/// the horizon, plus the horizon itself.
pub fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut cps = Vec::new();
    let mut p: u64 = 1;
    while p <= horizon {
        cps.push(p);
        match p.checked_mul(2) {
            Some(next) => p = next,
            None => break,
        }
    }
    if cps.last() != Some(&horizon) {
        cps.push(horizon);
    }
    cps
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_cumulative_regret: f64,
    /// Rounds appended to the refit history (failed adaptivity checks plus
    /// forced warm-up).
    pub warmup_rounds: u64,
    pub rejections_total: u64,
    pub pull_ns_mean: f64,
    pub pull_ns_max: u64,
    pub update_ns_mean: f64,
    pub update_ns_max: u64,
    /// Cumulative regret at each checkpoint, same order as `checkpoints`.
    pub checkpoint_regret: Vec<f64>,
    /// Least-squares fit of each slot's minimum design eigenvalue against
    /// the round number; present when eigenvalue sampling was on.
    pub eig_fits: Option<Vec<SlotFit>>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub schema: &'static str,
    pub algorithm: String,
    pub slots: usize,
    pub dim: usize,
    pub items_per_slot: usize,
    pub horizon: u64,
    pub seed_count: usize,
    pub checkpoints: Vec<u64>,
    /// Cross-seed mean cumulative regret per checkpoint, with a band of two
    /// sample standard deviations on each side.
    pub regret_mean: Vec<f64>,
    pub regret_lo: Vec<f64>,
    pub regret_hi: Vec<f64>,
    pub seeds: Vec<SeedSummary>,
}

pub const SUMMARY_SCHEMA: &str = "slate-glm summary v1";

fn summarize_seed(run: &SeedRun, cps: &[u64], slots: usize) -> SeedSummary {
    let mut checkpoint_regret = Vec::with_capacity(cps.len());
    let mut cum = 0.0;
    let mut cp_iter = cps.iter();
    let mut next_cp = cp_iter.next();
    for (i, rec) in run.records.iter().enumerate() {
        cum += rec.regret_increment;
        if next_cp == Some(&((i + 1) as u64)) {
            checkpoint_regret.push(cum);
            next_cp = cp_iter.next();
        }
    }

    let n = run.records.len().max(1) as f64;
    let pull_sum: u64 = run.records.iter().map(|r| r.pull_ns).sum();
    let update_sum: u64 = run.records.iter().map(|r| r.update_ns).sum();

    let mut eig_ts: Vec<Vec<f64>> = vec![Vec::new(); slots];
    let mut eig_ys: Vec<Vec<f64>> = vec![Vec::new(); slots];
    for rec in &run.records {
        if let Some(eigs) = &rec.slot_min_eigs {
            for (slot, &eig) in eigs.iter().enumerate() {
                eig_ts[slot].push(rec.t as f64);
                eig_ys[slot].push(eig);
            }
        }
    }
    let eig_fits = if eig_ts.iter().all(|v| v.is_empty()) {
        None
    } else {
        Some(
            (0..slots)
                .map(|slot| {
                    let fit = fit_line(&eig_ts[slot], &eig_ys[slot]);
                    SlotFit {
                        slot: slot + 1,
                        slope: fit.slope,
                        correlation: fit.correlation,
                        samples: eig_ts[slot].len() as u64,
                    }
                })
                .collect(),
        )
    };

    SeedSummary {
        seed: run.seed,
        final_cumulative_regret: cum,
        warmup_rounds: run.warmup_rounds(),
        rejections_total: run.records.iter().map(|r| r.rejection_count).sum(),
        pull_ns_mean: pull_sum as f64 / n,
        pull_ns_max: run.records.iter().map(|r| r.pull_ns).max().unwrap_or(0),
        update_ns_mean: update_sum as f64 / n,
        update_ns_max: run.records.iter().map(|r| r.update_ns).max().unwrap_or(0),
        checkpoint_regret,
        eig_fits,
    }
}

pub fn summarize(cfg: &ExperimentConfig, runs: &[SeedRun]) -> RunSummary {
    let cps = checkpoints(cfg.horizon);
    let seeds: Vec<SeedSummary> =
        runs.iter().map(|r| summarize_seed(r, &cps, cfg.slots)).collect();

    let mut regret_mean = Vec::with_capacity(cps.len());
    let mut regret_lo = Vec::with_capacity(cps.len());
    let mut regret_hi = Vec::with_capacity(cps.len());
    for i in 0..cps.len() {
        let vals: Vec<f64> = seeds.iter().map(|s| s.checkpoint_regret[i]).collect();
        let (mean, sd) = mean_sd(&vals);
        regret_mean.push(mean);
        regret_lo.push(mean - 2.0 * sd);
        regret_hi.push(mean + 2.0 * sd);
    }

    RunSummary {
        schema: SUMMARY_SCHEMA,
        algorithm: cfg.algorithm.to_string(),
        slots: cfg.slots,
        dim: cfg.dim,
        items_per_slot: cfg.items_per_slot,
        horizon: cfg.horizon,
        seed_count: runs.len(),
        checkpoints: cps,
        regret_mean,
        regret_lo,
        regret_hi,
        seeds,
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

pub const CSV_SCHEMA_LINE: &str = "# slate-glm run csv schema v1";

pub fn csv_header(slots: usize) -> String {
    let mut h = String::from("t");
    for i in 1..=slots {
        h.push_str(&format!(",slot_{i}"));
    }
    h.push_str(",reward,regret_increment,cumulative_regret,pull_ns,update_ns,warmup_flag,rejections");
    for i in 1..=slots {
        h.push_str(&format!(",min_eig_slot_{i}"));
    }
    h
}

/// Render one seed's rounds as CSV text. Floats use Rust's shortest
/// round-trip formatting; unsampled eigenvalue cells are empty.
pub fn render_csv(slots: usize, records: &[RoundRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str(&csv_header(slots));
    out.push('\n');
    let mut cum = 0.0;
    for rec in records {
        cum += rec.regret_increment;
        out.push_str(&rec.t.to_string());
        for idx in &rec.slot_indices {
            out.push(',');
            out.push_str(&idx.to_string());
        }
        out.push_str(&format!(
            ",{},{},{},{},{},{},{}",
            rec.reward,
            rec.regret_increment,
            cum,
            rec.pull_ns,
            rec.update_ns,
            u8::from(rec.warmup_round),
            rec.rejection_count,
        ));
        match &rec.slot_min_eigs {
            Some(eigs) => {
                for eig in eigs {
                    out.push(',');
                    out.push_str(&format!("{eig}"));
                }
            }
            None => {
                for _ in 0..slots {
                    out.push(',');
                }
            }
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes)
        .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// Create `base/hash8-unixseconds[-k]`, stepping `k` on collisions.
pub fn create_run_dir(base: &Path, hash8: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(base)
        .map_err(|source| HarnessError::Io { path: base.to_path_buf(), source })?;
    let secs =
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    for attempt in 0u32..10_000 {
        let name = if attempt == 0 {
            format!("{hash8}-{secs}")
        } else {
            format!("{hash8}-{secs}-{attempt}")
        };
        let dir = base.join(&name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(source) => return Err(HarnessError::Io { path: dir, source }),
        }
    }
    Err(HarnessError::Runtime("could not find a fresh run directory name".to_string()))
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub run_dir: PathBuf,
    pub csv_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
    pub seed_runs: Vec<SeedRun>,
}

/// Execute the configured experiment end to end: resolve the instance, run
/// every seed, and write `config.txt`, one `seed_*.csv` per seed, and
/// `summary.json` under a fresh run directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let resolved = cfg.instance().resolve().map_err(runtime)?;
    let seed_runs = run_seeds(cfg, &resolved)?;
    let summary = summarize(cfg, &seed_runs);

    let run_dir = create_run_dir(&cfg.out_dir, &cfg.hash8())?;
    write_file(&run_dir.join("config.txt"), cfg.raw_text.as_bytes())?;

    let mut csv_paths = Vec::with_capacity(seed_runs.len());
    for run in &seed_runs {
        let path = run_dir.join(format!("seed_{}.csv", run.seed));
        write_file(&path, render_csv(cfg.slots, &run.records).as_bytes())?;
        csv_paths.push(path);
    }

    let summary_path = run_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    write_file(&summary_path, format!("{json}\n").as_bytes())?;

    Ok(ExperimentOutput { run_dir, csv_paths, summary_path, summary, seed_runs })
}
