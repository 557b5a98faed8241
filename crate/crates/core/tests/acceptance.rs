//! Acceptance gate: ten product-level checks covering selection
//! equivalence, solver correctness, regret, per-round timing trends, design
//! matrix diagnostics, perturbation-distribution properties, warm-up
//! sparsity, and byte-level determinism.
//!
//! Each check prints exactly one PASS/FAIL line with its measured values
//! (run with `--nocapture` to see the lines as they happen). Heavy
//! simulations are shared between checks through lazy statics, and a global
//! gate serializes the checks so wall-clock budgets are measured unloaded.

use std::sync::Mutex;
use std::time::Instant;

use once_cell::sync::Lazy;

use slate_glm::bandit::{
    enumerate_slates, ofu_select, step_ofu, ts_perturb, ts_select, LearnerParams, PerturbResult,
    TsScaleMode,
};
use slate_glm::glm::{self, ScalarSchedule};
use slate_glm::harness::{
    run_diagnostics, run_experiment, run_seeds, DiagReport, ExperimentConfig, SeedRun,
};
use slate_glm::linalg::{self, SymMatrix};
use slate_glm::optim::{
    proximal_weight, solve_penalized, solve_regularized_mle, AdmissibleSet, DataTerm, LabelMode,
    PenalizedObjective,
};
use slate_glm::rng::SplitMix64;
use slate_glm::OnlineState;

/// Serializes the checks: each takes the whole machine, so runtime budgets
/// and timing ratios are measured without cross-test contention.
static GATE: Mutex<()> = Mutex::new(());

fn gate() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(number: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number:2} [{status}] {name}: {detail}");
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softplus, the common factor of both logistic losses:
/// `xent(z, 0) = softplus(z)` and `xent(z, 1) = softplus(z) - z`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn params(slots: usize, dim: usize, s: f64) -> LearnerParams {
    LearnerParams {
        schedule: ScalarSchedule::new(1.0, 1.0, 1.0, s, slots, dim, 0.05).unwrap(),
        s,
        kappa: glm::kappa_bound(s, 1.0).unwrap(),
        ts_scale: TsScaleMode::SqrtEta,
        solver_max_iter: 10_000,
        rejection_cap: 10_000,
        refresh_every: 256,
    }
}

fn random_unit_scaled(rng: &mut SplitMix64, dim: usize, max_norm: f64) -> Vec<f64> {
    let v = rng.gaussian_vec(dim);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    let r = max_norm * rng.next_f64();
    v.into_iter().map(|x| x * r / n).collect()
}

fn random_itemsets(rng: &mut SplitMix64, slots: usize, dim: usize, k: usize) -> Vec<Vec<Vec<f64>>> {
    let radius = 1.0 / (slots as f64).sqrt();
    (0..slots)
        .map(|_| (0..k).map(|_| random_unit_scaled(rng, dim, radius)).collect())
        .collect()
}

fn run_config(text: &str) -> Vec<SeedRun> {
    let cfg = ExperimentConfig::from_str(text).expect("acceptance config must parse");
    let resolved = cfg.instance().resolve().expect("acceptance instance must resolve");
    run_seeds(&cfg, &resolved).expect("acceptance run must succeed")
}

fn diag_config(text: &str) -> DiagReport {
    let cfg = ExperimentConfig::from_str(text).expect("acceptance config must parse");
    run_diagnostics(&cfg).expect("acceptance diagnostics must succeed")
}

const SEEDS_10: &str = "1,2,3,4,5,6,7,8,9,10";
const SEEDS_20: &str = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20";

/// Regret experiment pair: optimistic learner vs uniform-random control on
/// the same instance and reward streams (N=3, d=5, K=5, T=10^4, 10 seeds,
/// fresh ball-sampled item sets each round, schedule constants at 1).
static REGRET_RUNS: Lazy<(Vec<SeedRun>, Vec<SeedRun>)> = Lazy::new(|| {
    let base = "slots = 3\n\
                dim = 5\n\
                items_per_slot = 5\n\
                mode = infinite\n\
                horizon = 10000\n\
                instance_seed = 7\n";
    let ofu = format!("algorithm = slate-glm-ofu\n{base}seeds = {SEEDS_10}\n");
    let random = format!("algorithm = random\n{base}seeds = {SEEDS_10}\n");
    (run_config(&ofu), run_config(&random))
});

/// Design-matrix diagnostics on forced-choice runs: one item per slot, so
/// the item the learner sees each round is an unconditioned, zero-mean draw
/// -- the regime the slot/slate matrix comparison is stated for. Selection
/// plays no role; the update path (adaptivity check, online solves, both
/// matrix levels) is the production path.
static DIAG_FORCED_CHOICE: Lazy<DiagReport> = Lazy::new(|| {
    diag_config(&format!(
        "algorithm = slate-glm-ofu\n\
         slots = 3\n\
         dim = 5\n\
         items_per_slot = 1\n\
         mode = infinite\n\
         norm_style = box\n\
         horizon = 10000\n\
         seeds = {SEEDS_20}\n\
         instance_seed = 7\n\
         eig_every = 100\n\
         sandwich_every = 500\n"
    ))
});

/// Design-matrix diagnostics on competitive runs: five box-normalized items
/// per slot, optimistic selection live.
static DIAG_COMPETITIVE: Lazy<DiagReport> = Lazy::new(|| {
    diag_config(&format!(
        "algorithm = slate-glm-ofu\n\
         slots = 3\n\
         dim = 5\n\
         items_per_slot = 5\n\
         mode = infinite\n\
         norm_style = box\n\
         horizon = 10000\n\
         seeds = {SEEDS_20}\n\
         instance_seed = 7\n\
         eig_every = 100\n\
         sandwich_every = 500\n"
    ))
});

#[test]
fn criterion_01_slot_decomposed_selection_matches_enumerated_argmax() {
    let _g = gate();
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xACC1);
    let trials = 200usize;
    let mut checked = 0usize;

    for trial in 0..trials {
        let slots = 2 + trial % 2; // N in {2, 3}
        let k = 2 + trial % 4; // K in {2..5}
        let dim = 2 + (trial / 4) % 4; // d in {2..5}
        let s = 1.0 + rng.next_f64();

        let mut state = OnlineState::new(slots, dim, params(slots, dim, s)).unwrap();
        // Drive a few real rounds so the state (design matrices, estimate,
        // round counter) is a reachable one rather than hand-assembled.
        for _ in 0..3 {
            let sets = random_itemsets(&mut rng, slots, dim, k);
            let y = rng.below(2) as u8;
            step_ofu(&mut state, &sets, |_, _| (y, 0.0)).unwrap();
        }

        let sets = random_itemsets(&mut rng, slots, dim, k);

        // Per-slot score tables built with the same primitives the library
        // uses, so the comparison is exact (no reconstruction slack).
        let eta_sqrt = state.params.schedule.eta(state.t).sqrt();
        let mut linear = vec![vec![0.0f64; k]; slots];
        let mut optimistic = vec![vec![0.0f64; k]; slots];
        let theta_tilde = match ts_perturb(&state, &mut rng, eta_sqrt.max(1e-9)).unwrap() {
            PerturbResult::Accepted { theta, .. } => theta,
            PerturbResult::Exhausted => state.theta.clone(),
        };
        for i in 0..slots {
            let w_inv = state.w_slots[i].inverse();
            for (j, x) in sets[i].iter().enumerate() {
                optimistic[i][j] = dot(x, state.theta_slot(i))
                    + eta_sqrt * linalg::mahalanobis_norm(x, w_inv).unwrap();
                linear[i][j] = dot(x, &theta_tilde[i * dim..(i + 1) * dim]);
            }
        }

        // Brute force: lexicographic scan over every slate in the product
        // space, strict-greater argmax (ties keep the earliest tuple).
        let brute = |table: &[Vec<f64>]| -> Vec<usize> {
            let all = enumerate_slates(&sets, 100_000).unwrap();
            let mut best_idx: Vec<usize> = vec![0; slots];
            let mut best = f64::NEG_INFINITY;
            let mut counter = vec![0usize; slots];
            for _slate in &all {
                let score: f64 = (0..slots).map(|i| table[i][counter[i]]).sum();
                if score > best {
                    best = score;
                    best_idx = counter.clone();
                }
                // lexicographic advance, last slot least significant
                for pos in (0..slots).rev() {
                    counter[pos] += 1;
                    if counter[pos] < k {
                        break;
                    }
                    counter[pos] = 0;
                }
            }
            best_idx
        };

        let ofu = ofu_select(&state, &sets).unwrap();
        assert_eq!(ofu.indices, brute(&optimistic), "optimistic selection diverged (trial {trial})");
        let ts = ts_select(&theta_tilde, &sets).unwrap();
        assert_eq!(ts.indices, brute(&linear), "sampled-parameter selection diverged (trial {trial})");
        checked += 1;
    }

    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        "slot-decomposed selection equals enumerated argmax",
        checked == trials && elapsed < 10.0,
        &format!("{checked}/{trials} states exact (optimistic + sampled), {elapsed:.2}s (< 10s)"),
    );
}

#[test]
fn criterion_02_solvers_match_dense_grid_minimizers() {
    let _g = gate();
    let start = Instant::now();
    let mut rng = SplitMix64::new(0xACC2);
    let s = 1.5f64;
    let set = AdmissibleSet::ball(s).unwrap();
    let eta_w = proximal_weight(set.diameter());
    let grid_n = 2001usize;
    let problems = 50usize;
    let mut worst = 0.0f64;

    for _ in 0..problems {
        let anchor = random_unit_scaled(&mut rng, 2, s);
        let mut metric = SymMatrix::identity(2);
        for _ in 0..2 {
            let v = random_unit_scaled(&mut rng, 2, 1.0);
            metric.add_scaled_outer(&v, 2.0 * rng.next_f64()).unwrap();
        }
        let x = random_unit_scaled(&mut rng, 2, 1.0);
        let y = rng.below(2) as u8;
        let history: Vec<(Vec<f64>, u8)> =
            (0..6).map(|_| (random_unit_scaled(&mut rng, 2, 1.0), rng.below(2) as u8)).collect();
        let gamma = 0.3 + rng.next_f64();

        // Anchored objectives: both-labels smoothing, each single label, and
        // the realized-label variant (the production update re-solve).
        let objective = |mode: LabelMode| {
            PenalizedObjective::new(
                anchor.clone(),
                metric.clone(),
                eta_w,
                vec![DataTerm { x: x.clone(), mode }],
            )
            .unwrap()
        };
        let obj_both = objective(LabelMode::Both);
        let obj_zero = objective(LabelMode::from_label(0));
        let obj_one = objective(LabelMode::from_label(1));
        let obj_real = objective(LabelMode::from_label(y));

        let solved = [
            obj_both.value(&solve_penalized(&obj_both, &set, 1e-6, 10_000).unwrap()),
            obj_zero.value(&solve_penalized(&obj_zero, &set, 1e-6, 10_000).unwrap()),
            obj_one.value(&solve_penalized(&obj_one, &set, 1e-6, 10_000).unwrap()),
            obj_real.value(&solve_penalized(&obj_real, &set, 1e-6, 10_000).unwrap()),
        ];
        let hist_refs: Vec<(&[f64], u8)> = history.iter().map(|(h, y)| (h.as_slice(), *y)).collect();
        let mle = solve_regularized_mle(2, &hist_refs, gamma, s, 1e-6, 10_000).unwrap();
        let mle_value = gamma * dot(&mle, &mle)
            + history.iter().map(|(h, y)| softplus(dot(h, &mle)) - f64::from(*y) * dot(h, &mle)).sum::<f64>();

        // Dense grid over the bounding square of the feasible ball. One pass
        // shares the logistic term across the three anchored objectives.
        let mut best = [f64::INFINITY; 4];
        let mut best_mle = f64::INFINITY;
        let step = 2.0 * s / (grid_n as f64 - 1.0);
        for ia in 0..grid_n {
            let a = -s + step * ia as f64;
            for ib in 0..grid_n {
                let b = -s + step * ib as f64;
                if a * a + b * b > s * s {
                    continue;
                }
                let da = a - anchor[0];
                let db = b - anchor[1];
                let quad = eta_w
                    * (metric.get(0, 0) * da * da
                        + 2.0 * metric.get(0, 1) * da * db
                        + metric.get(1, 1) * db * db);
                let z = x[0] * a + x[1] * b;
                let sp = softplus(z);
                let vals = [quad + 2.0 * sp - z, quad + sp, quad + sp - z];
                for (slot, v) in vals.iter().enumerate() {
                    if *v < best[slot] {
                        best[slot] = *v;
                    }
                }
                if vals[1 + y as usize] < best[3] {
                    best[3] = vals[1 + y as usize];
                }
                let mut m = gamma * (a * a + b * b);
                for (h, yy) in &history {
                    let zh = h[0] * a + h[1] * b;
                    m += softplus(zh) - f64::from(*yy) * zh;
                }
                if m < best_mle {
                    best_mle = m;
                }
            }
        }

        for (solved_value, grid_value) in solved.iter().zip(&best) {
            worst = worst.max((solved_value - grid_value).abs());
        }
        worst = worst.max((mle_value - best_mle).abs());
    }

    let elapsed = start.elapsed().as_secs_f64();
    report(
        2,
        "constrained solvers match dense grid minimizers",
        worst <= 1e-3 && elapsed < 60.0,
        &format!(
            "{problems} problems x 5 objectives, worst |F(solver) - F(grid)| = {worst:.2e} (<= 1e-3), {elapsed:.1}s (< 60s)"
        ),
    );
}

#[test]
fn criterion_03_gradients_and_curvature_bounds_hold() {
    let _g = gate();
    let mut rng = SplitMix64::new(0xACC3);
    let mut worst_rel = 0.0f64;

    for trial in 0..100 {
        let dim = 1 + trial % 4;
        let anchor = random_unit_scaled(&mut rng, dim, 1.5);
        let mut metric = SymMatrix::identity(dim);
        for _ in 0..dim {
            let v = random_unit_scaled(&mut rng, dim, 1.0);
            metric.add_scaled_outer(&v, rng.next_f64()).unwrap();
        }
        let terms: Vec<DataTerm> = (0..1 + trial % 3)
            .map(|j| DataTerm {
                x: random_unit_scaled(&mut rng, dim, 1.0),
                mode: match j {
                    0 => LabelMode::Both,
                    _ => LabelMode::from_label((j % 2) as u8),
                },
            })
            .collect();
        let obj = PenalizedObjective::new(anchor, metric, 0.25, terms).unwrap();

        let theta = random_unit_scaled(&mut rng, dim, 1.5);
        let grad = obj.grad(&theta);
        let h = 1e-6;
        for i in 0..dim {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / grad[i].abs().max(1.0);
            worst_rel = worst_rel.max(rel);
        }
    }

    // Scalar loss derivative against finite differences on raw logits.
    for _ in 0..100 {
        let z = rng.uniform(-8.0, 8.0);
        let y = rng.below(2) as u8;
        let h = 1e-6;
        let fd = (glm::xent_loss(z + h, y) - glm::xent_loss(z - h, y)) / (2.0 * h);
        let rel = (fd - glm::xent_grad(z, y)).abs() / glm::xent_grad(z, y).abs().max(1.0);
        worst_rel = worst_rel.max(rel);
    }

    let points = 100_000usize;
    let mut curvature_ok = true;
    for _ in 0..points {
        let z1 = rng.uniform(-25.0, 25.0);
        let z2 = rng.uniform(-25.0, 25.0);
        curvature_ok &= glm::self_concordance_check(z1, z2);
    }

    report(
        3,
        "analytic gradients and logistic curvature bounds",
        worst_rel <= 1e-5 && curvature_ok,
        &format!(
            "worst relative gradient error {worst_rel:.2e} (<= 1e-5) on 100 objectives + 100 scalar losses; curvature inequalities held on {points} logit pairs"
        ),
    );
}

#[test]
fn criterion_04_optimistic_regret_beats_random_and_grows_sublinearly() {
    let _g = gate();
    let start = Instant::now();
    let (ofu, random) = &*REGRET_RUNS;

    let mean_final = |runs: &[SeedRun]| {
        runs.iter().map(SeedRun::final_cumulative_regret).sum::<f64>() / runs.len() as f64
    };
    let ofu_final = mean_final(ofu);
    let random_final = mean_final(random);
    let ofu_half: f64 =
        ofu.iter().map(|r| r.cumulative_regret_at(5_000)).sum::<f64>() / ofu.len() as f64;

    let ratio_vs_random = ofu_final / random_final;
    let growth = ofu_final / ofu_half;
    let elapsed = start.elapsed().as_secs_f64();

    report(
        4,
        "optimistic learner beats the random policy with sublinear growth",
        ratio_vs_random <= 0.5 && growth <= 1.8,
        &format!(
            "mean R(10^4): learner {ofu_final:.1} vs random {random_final:.1}, ratio {ratio_vs_random:.3} (<= 0.5); R(10^4)/R(5x10^3) = {growth:.3} (<= 1.8); 10 seeds, {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_05_per_round_pull_time_stays_flat_while_enumeration_explodes() {
    let _g = gate();
    let start = Instant::now();
    let cfg = ExperimentConfig::from_str(
        "algorithm = slate-glm-ofu\n\
         slots = 3\n\
         dim = 5\n\
         items_per_slot = 7\n\
         mode = infinite\n\
         norm_style = box\n\
         horizon = 500\n\
         seeds = 3\n\
         instance_seed = 7\n",
    )
    .unwrap();
    let table = slate_glm::harness::run_timing_bench(&cfg, &[3, 4, 5]).unwrap();

    let pull = |algorithm: &str, slots: usize| -> f64 {
        let cell = table
            .cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.slots == slots)
            .unwrap_or_else(|| panic!("missing bench cell {algorithm}/{slots}"));
        assert!(!cell.infeasible, "cell {algorithm}/{slots} unexpectedly infeasible");
        cell.avg_pull_ns
    };

    let base_ratios =
        [pull("baseline-ofu", 4) / pull("baseline-ofu", 3), pull("baseline-ofu", 5) / pull("baseline-ofu", 4)];
    let slate_ratios = [
        pull("slate-glm-ofu", 4) / pull("slate-glm-ofu", 3),
        pull("slate-glm-ofu", 5) / pull("slate-glm-ofu", 4),
    ];
    let elapsed = start.elapsed().as_secs_f64();

    report(
        5,
        "slot-level pull time flat, enumerating baseline explodes",
        base_ratios.iter().all(|r| *r >= 3.0) && slate_ratios.iter().all(|r| *r <= 2.0),
        &format!(
            "baseline pull grows x{:.1}, x{:.1} per added slot (>= 3 each); slot-level grows x{:.2}, x{:.2} (<= 2 each); K=7, d=5, T=500, {elapsed:.1}s (absolute times are hardware-specific and not asserted)",
            base_ratios[0], base_ratios[1], slate_ratios[0], slate_ratios[1]
        ),
    );
}

#[test]
fn criterion_06_slot_design_eigenvalues_grow_linearly() {
    let _g = gate();
    let start = Instant::now();
    let mut min_corr = 1.0f64;
    let mut min_slope = f64::INFINITY;
    let mut fits = 0usize;
    for diag in [&*DIAG_COMPETITIVE, &*DIAG_FORCED_CHOICE] {
        for seed in &diag.seeds {
            for fit in &seed.eig_fits {
                min_corr = min_corr.min(fit.correlation);
                min_slope = min_slope.min(fit.slope);
                fits += 1;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();

    report(
        6,
        "minimum design eigenvalue grows linearly in every slot",
        min_corr >= 0.99 && min_slope > 0.0,
        &format!(
            "{fits} slot fits over 2x20 seeds (competitive K=5 and forced-choice K=1): min correlation {min_corr:.5} (>= 0.99), min slope {min_slope:.5} (> 0); {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_07_slate_and_slot_matrices_stay_multiplicatively_close() {
    let _g = gate();
    let start = Instant::now();
    let diag = &*DIAG_FORCED_CHOICE;

    let mut late_samples = 0usize;
    let mut late_failures = 0usize;
    let mut tight_first: Vec<Option<u64>> = Vec::new();
    let mut tight_persists = 0usize;
    for seed in &diag.seeds {
        for sample in &seed.sandwich_samples {
            if sample.t >= 1000 {
                late_samples += 1;
                if !sample.loose_holds {
                    late_failures += 1;
                }
            }
        }
        tight_first.push(seed.tight_band.first_hold_t);
        if seed.tight_band.persists {
            tight_persists += 1;
        }
    }
    let fmt_t = |t: Option<u64>| t.map_or_else(|| "never".to_string(), |v| v.to_string());
    let first_min = tight_first.iter().flatten().min().copied();
    let first_max = tight_first.iter().flatten().max().copied();
    let elapsed = start.elapsed().as_secs_f64();

    report(
        7,
        "slate-level matrix sandwiched by slot blocks",
        late_failures == 0 && late_samples > 0,
        &format!(
            "(1/2, 3/2) band held at {}/{} sampled rounds with t >= 1000 across 20 forced-choice seeds; (3/4, 5/4) band first holds at t in [{}, {}] and persists in {tight_persists}/20 seeds (report only); {elapsed:.1}s",
            late_samples - late_failures,
            late_samples,
            fmt_t(first_min),
            fmt_t(first_max)
        ),
    );
}

#[test]
fn criterion_08_perturbation_distribution_has_the_right_tails() {
    let _g = gate();
    let samples = 100_000usize;
    let delta = 0.05f64;
    let mut rng = SplitMix64::new(0xACC8);
    let mut worst_lo = 1.0f64;
    let mut worst_hi = 0.0f64;
    let mut norm_cover = Vec::new();

    for dim in [5usize, 15] {
        let directions: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let v = rng.gaussian_vec(dim);
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x / n).collect()
            })
            .collect();
        let mut dir_hits = vec![0usize; directions.len()];
        let mut norm_hits = 0usize;
        let norm_bound = (2.0 * dim as f64 * (2.0 * dim as f64 / delta).ln()).sqrt();

        for _ in 0..samples {
            let eta = slate_glm::bandit::dts_sample(dim, &mut rng);
            let norm_sq: f64 = eta.iter().map(|x| x * x).sum();
            if norm_sq.sqrt() <= norm_bound {
                norm_hits += 1;
            }
            for (hits, u) in dir_hits.iter_mut().zip(&directions) {
                if dot(u, &eta) >= 1.0 {
                    *hits += 1;
                }
            }
        }

        for hits in dir_hits {
            let p = hits as f64 / samples as f64;
            worst_lo = worst_lo.min(p);
            worst_hi = worst_hi.max(p);
        }
        norm_cover.push(norm_hits as f64 / samples as f64);
    }

    let anti_ok = worst_lo >= 0.148 && worst_hi <= 0.170;
    let cover_ok = norm_cover.iter().all(|p| *p >= 1.0 - delta);
    report(
        8,
        "perturbation anti-concentration and norm coverage",
        anti_ok && cover_ok,
        &format!(
            "directional tail mass in [{worst_lo:.4}, {worst_hi:.4}] (target [0.148, 0.170]) over 40 directions x {samples} draws; norm bound covered {:.4}/{:.4} (>= {:.2}) for d=5/15",
            norm_cover[0], norm_cover[1], 1.0 - delta
        ),
    );
}

#[test]
fn criterion_09_warmup_history_stays_sparse_and_decelerates() {
    let _g = gate();
    let (ofu, _) = &*REGRET_RUNS;

    let horizon = 10_000u64;
    let mut worst_fraction = 0.0f64;
    let mut decelerates = true;
    let mut total_final = 0u64;
    for run in ofu {
        let half = run
            .records
            .iter()
            .filter(|r| r.t <= horizon / 2 && r.warmup_round)
            .count() as u64;
        let full = run.warmup_rounds();
        total_final += full;
        worst_fraction = worst_fraction.max(full as f64 / horizon as f64);
        // Holds trivially when the warm-up history is empty (0 <= 0).
        decelerates &= full.saturating_sub(half) <= half;
    }

    report(
        9,
        "warm-up history sparse with decelerating growth (soft gate)",
        worst_fraction <= 0.10 && decelerates,
        &format!(
            "worst |H_T|/T = {worst_fraction:.4} (<= 0.10); growth in (5x10^3, 10^4] never exceeded growth in [1, 5x10^3]; total warm-up rounds across 10 seeds = {total_final}"
        ),
    );
}

#[test]
fn criterion_10_identical_configs_produce_byte_identical_outputs() {
    let _g = gate();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "algorithm = slate-glm-ts\n\
         slots = 3\n\
         dim = 4\n\
         items_per_slot = 4\n\
         mode = infinite\n\
         horizon = 400\n\
         seeds = 5,6\n\
         instance_seed = 11\n\
         eig_every = 50\n\
         out_dir = {}\n",
        dir.path().display()
    );
    let cfg = ExperimentConfig::from_str(&text).unwrap();
    let first = run_experiment(&cfg).unwrap();
    let second = run_experiment(&cfg).unwrap();

    let mut identical = first.csv_paths.len() == second.csv_paths.len();
    let mut compared = 0usize;
    for (a, b) in first.csv_paths.iter().zip(&second.csv_paths) {
        identical &= std::fs::read(a).unwrap() == std::fs::read(b).unwrap();
        compared += 1;
    }
    let summaries_match =
        std::fs::read(&first.summary_path).unwrap() == std::fs::read(&second.summary_path).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    report(
        10,
        "reruns are byte-identical",
        identical && summaries_match,
        &format!(
            "{compared} per-seed CSVs and the summary byte-identical across two sampling-algorithm runs (timing columns zeroed by default); {elapsed:.1}s"
        ),
    );
}
