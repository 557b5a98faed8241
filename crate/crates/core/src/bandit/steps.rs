//! Full interaction rounds: select, observe, update, with pull and update
//! phases timed disjointly on a monotonic clock. The reward callback runs
//! outside both timers so environment cost never pollutes learner cost.

use super::select::{
    enumerate_slates, ofu_select, ts_perturb, ts_perturb_joint, ts_select, PerturbResult,
};
use super::update::{adaptivity_check, online_update, warmup_update, AdaptivityOutcome};
use super::{BanditError, OnlineState, Slate, TsScaleMode};
use crate::env::RoundRecord;
use crate::linalg::mahalanobis_norm;
use crate::rng::SplitMix64;
use std::time::Instant;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ts_scale(state: &OnlineState) -> f64 {
    let eta = state.params.schedule.eta(state.t);
    match state.params.ts_scale {
        TsScaleMode::SqrtEta => eta.sqrt(),
        TsScaleMode::RawEta => eta,
    }
}

/// Apply the shared estimator subroutine to an observed round and report
/// whether it was banked as warm-up.
fn apply_update(state: &mut OnlineState, slate: &Slate, y: u8) -> Result<bool, BanditError> {
    match adaptivity_check(state, slate)? {
        AdaptivityOutcome::Pass(sols) => {
            online_update(state, slate, y, &sols)?;
            Ok(false)
        }
        AdaptivityOutcome::Fail(_) => {
            warmup_update(state, slate, y)?;
            Ok(true)
        }
    }
}

fn make_record(
    t: u64,
    indices: Vec<usize>,
    reward: u8,
    regret_increment: f64,
    pull_ns: u64,
    update_ns: u64,
    warmup_round: bool,
    rejection_count: u64,
) -> RoundRecord {
    RoundRecord {
        t,
        slot_indices: indices,
        reward,
        regret_increment,
        pull_ns,
        update_ns,
        warmup_round,
        rejection_count,
        slot_min_eigs: None,
    }
}

/// One optimistic round. `reward_fn` returns the observed reward and the
/// round's regret increment (the caller owns the environment).
pub fn step_ofu(
    state: &mut OnlineState,
    itemsets: &[Vec<Vec<f64>>],
    reward_fn: impl FnOnce(&Slate, &[usize]) -> (u8, f64),
) -> Result<RoundRecord, BanditError> {
    let t = state.t;
    let pull_start = Instant::now();
    let sel = ofu_select(state, itemsets)?;
    let pull_ns = pull_start.elapsed().as_nanos() as u64;

    let (reward, regret) = reward_fn(&sel.slate, &sel.indices);

    let update_start = Instant::now();
    let warmup = apply_update(state, &sel.slate, reward)?;
    let update_ns = update_start.elapsed().as_nanos() as u64;

    Ok(make_record(t, sel.indices, reward, regret, pull_ns, update_ns, warmup, 0))
}

/// One posterior-sampling round: perturb (with rejection), slot-greedy
/// select, observe, update. A rejection-exhausted perturbation falls back to
/// the unperturbed estimate and is visible in the record's rejection count.
pub fn step_ts(
    state: &mut OnlineState,
    itemsets: &[Vec<Vec<f64>>],
    rng: &mut SplitMix64,
    reward_fn: impl FnOnce(&Slate, &[usize]) -> (u8, f64),
) -> Result<RoundRecord, BanditError> {
    let t = state.t;
    let pull_start = Instant::now();
    let scale = ts_scale(state);
    let (theta_tilde, rejections) = match ts_perturb(state, rng, scale)? {
        PerturbResult::Accepted { theta, rejections } => (theta, rejections),
        PerturbResult::Exhausted => (state.theta.clone(), state.params.rejection_cap),
    };
    let sel = ts_select(&theta_tilde, itemsets)?;
    let pull_ns = pull_start.elapsed().as_nanos() as u64;

    let (reward, regret) = reward_fn(&sel.slate, &sel.indices);

    let update_start = Instant::now();
    let warmup = apply_update(state, &sel.slate, reward)?;
    let update_ns = update_start.elapsed().as_nanos() as u64;

    Ok(make_record(t, sel.indices, reward, regret, pull_ns, update_ns, warmup, rejections))
}

/// Selection rule of the slate-enumerating baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    Ofu,
    Ts,
}

/// One round of an enumerating baseline. When `prebuilt` is given (fixed
/// item sets) the pull timer covers scoring only; otherwise enumeration runs
/// inside the pull timer, since changing contexts force it every round.
/// Selection scores live at the slate level — `<x, theta>` plus either the
/// optimism bonus in the slate-level design metric (OFU) or zero under the
/// full-dimension perturbed parameter (TS) — and the update subroutine is
/// identical to the slot-decomposed learners'.
#[allow(clippy::too_many_arguments)]
pub fn baseline_step(
    state: &mut OnlineState,
    itemsets: &[Vec<Vec<f64>>],
    prebuilt: Option<&[Slate]>,
    enumeration_cap: u64,
    mode: BaselineMode,
    rng: &mut SplitMix64,
    reward_fn: impl FnOnce(&Slate, &[usize]) -> (u8, f64),
) -> Result<RoundRecord, BanditError> {
    let t = state.t;
    let pull_start = Instant::now();

    let owned;
    let slates: &[Slate] = match prebuilt {
        Some(s) => s,
        None => {
            owned = enumerate_slates(itemsets, enumeration_cap)?;
            &owned
        }
    };
    if slates.is_empty() {
        return Err(BanditError::EmptyItemSet { slot: 0 });
    }

    let mut rejections = 0u64;
    let chosen_pos = match mode {
        BaselineMode::Ofu => {
            let eta_sqrt = state.params.schedule.eta(state.t).sqrt();
            let w_inv = state.w.inverse();
            let mut best = f64::NEG_INFINITY;
            let mut best_pos = 0usize;
            for (pos, slate) in slates.iter().enumerate() {
                let score = dot(slate.flat(), &state.theta)
                    + eta_sqrt * mahalanobis_norm(slate.flat(), w_inv)?;
                if score > best {
                    best = score;
                    best_pos = pos;
                }
            }
            best_pos
        }
        BaselineMode::Ts => {
            let scale = ts_scale(state);
            let theta_tilde = match ts_perturb_joint(state, rng, scale)? {
                PerturbResult::Accepted { theta, rejections: r } => {
                    rejections = r;
                    theta
                }
                PerturbResult::Exhausted => {
                    rejections = state.params.rejection_cap;
                    state.theta.clone()
                }
            };
            let mut best = f64::NEG_INFINITY;
            let mut best_pos = 0usize;
            for (pos, slate) in slates.iter().enumerate() {
                let score = dot(slate.flat(), &theta_tilde);
                if score > best {
                    best = score;
                    best_pos = pos;
                }
            }
            best_pos
        }
    };
    let slate = slates[chosen_pos].clone();
    let pull_ns = pull_start.elapsed().as_nanos() as u64;

    // Recover per-slot indices from the lexicographic position when the
    // caller enumerated; with prebuilt lists the position encodes them the
    // same way because enumeration order is canonical.
    let indices = position_to_indices(chosen_pos, itemsets);

    let (reward, regret) = reward_fn(&slate, &indices);

    let update_start = Instant::now();
    let warmup = apply_update(state, &slate, reward)?;
    let update_ns = update_start.elapsed().as_nanos() as u64;

    Ok(make_record(t, indices, reward, regret, pull_ns, update_ns, warmup, rejections))
}

fn position_to_indices(mut pos: usize, itemsets: &[Vec<Vec<f64>>]) -> Vec<usize> {
    let mut out = vec![0usize; itemsets.len()];
    for i in (0..itemsets.len()).rev() {
        let k = itemsets[i].len();
        out[i] = pos % k;
        pos /= k;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::testutil;
    use super::*;
    use crate::glm::mu;

    fn coin(reward_rng: &mut SplitMix64, z: f64) -> u8 {
        (reward_rng.next_f64() < mu(z)) as u8
    }

    #[test]
    fn scripted_round_is_reproducible() {
        let mut rng = SplitMix64::new(50);
        let sets = testutil::random_itemsets(&mut rng, 2, 2, 3);
        let run = |seed: u64| -> Vec<(Vec<usize>, u8)> {
            let mut st = testutil::state(2, 2, 1.0);
            let mut reward_rng = SplitMix64::new(seed);
            let mut log = Vec::new();
            for _ in 0..20 {
                let rec = step_ofu(&mut st, &sets, |slate, _| {
                    let z = dot(slate.flat(), &[0.4, -0.2, 0.1, 0.3]);
                    (coin(&mut reward_rng, z), 0.0)
                })
                .unwrap();
                log.push((rec.slot_indices, rec.reward));
            }
            log
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn ofu_steps_match_forced_sync_enumerating_twin() {
        // At every round, the slot-decomposed choice must equal the
        // brute-force slate argmax of the same decomposed score under
        // identical state. The twin is kept identical by construction: both
        // run the same update on the same chosen slate.
        let mut rng = SplitMix64::new(51);
        let mut reward_rng = SplitMix64::new(52);
        let mut st = testutil::state(2, 2, 1.0);
        let theta_star = [0.35, -0.3, 0.2, 0.25];
        for _ in 0..100 {
            let sets = testutil::random_itemsets(&mut rng, 2, 2, 3);
            let eta_sqrt = st.params.schedule.eta(st.t).sqrt();
            // Twin: enumerate and score with the same slot-decomposed rule.
            let slates = enumerate_slates(&sets, 100).unwrap();
            let mut best = f64::NEG_INFINITY;
            let mut best_pos = 0;
            for (pos, slate) in slates.iter().enumerate() {
                let mut score = 0.0;
                for i in 0..2 {
                    score += dot(slate.slot(i), st.theta_slot(i))
                        + eta_sqrt
                            * mahalanobis_norm(slate.slot(i), st.w_slots[i].inverse()).unwrap();
                }
                if score > best {
                    best = score;
                    best_pos = pos;
                }
            }
            let twin_indices = position_to_indices(best_pos, &sets);

            let rec = step_ofu(&mut st, &sets, |slate, _| {
                let z = dot(slate.flat(), &theta_star);
                (coin(&mut reward_rng, z), 0.0)
            })
            .unwrap();
            assert_eq!(rec.slot_indices, twin_indices, "round {}", rec.t);
        }
    }

    #[test]
    fn warmup_rounds_leave_design_matrix_frozen() {
        // Force the fail branch with a big ball and aligned boundary anchor.
        let mut st = testutil::state(1, 2, 10.0);
        st.theta = vec![9.99, 0.0];
        let sets = vec![vec![vec![1.0, 0.0]]];
        let w_before = st.w.matrix().clone();
        let rec = step_ofu(&mut st, &sets, |_, _| (1, 0.0)).unwrap();
        if rec.warmup_round {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(st.w.matrix().get(i, j), w_before.get(i, j));
                }
            }
            assert_eq!(st.history.len(), 1);
        } else {
            // If the state passed the check anyway, the matrices moved; both
            // branches exercised elsewhere. Make sure bookkeeping advanced.
            assert_eq!(st.t, 2);
        }
    }

    #[test]
    fn ts_steps_are_reproducible_and_record_rejections() {
        let mut rng = SplitMix64::new(53);
        let sets = testutil::random_itemsets(&mut rng, 2, 2, 3);
        let run = |seed: u64| -> Vec<(Vec<usize>, u8, u64)> {
            let mut st = testutil::state(2, 2, 1.0);
            let mut learner_rng = SplitMix64::new(seed);
            let mut reward_rng = SplitMix64::new(seed + 1);
            let mut log = Vec::new();
            for _ in 0..20 {
                let rec = step_ts(&mut st, &sets, &mut learner_rng, |slate, _| {
                    let z = dot(slate.flat(), &[0.4, -0.2, 0.1, 0.3]);
                    (coin(&mut reward_rng, z), 0.0)
                })
                .unwrap();
                log.push((rec.slot_indices, rec.reward, rec.rejection_count));
            }
            log
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn baseline_single_slate_is_forced() {
        let mut st = testutil::state(2, 2, 1.0);
        let sets = vec![vec![vec![0.5, 0.0]], vec![vec![0.0, 0.5]]];
        let mut rng = SplitMix64::new(54);
        let rec = baseline_step(
            &mut st,
            &sets,
            None,
            100,
            BaselineMode::Ofu,
            &mut rng,
            |_, _| (1, 0.0),
        )
        .unwrap();
        assert_eq!(rec.slot_indices, vec![0, 0]);
    }

    #[test]
    fn baseline_ofu_matches_score_table() {
        let mut rng = SplitMix64::new(55);
        let mut st = testutil::state(2, 2, 1.0);
        let v = rng.gaussian_vec(4);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        st.theta = v.iter().map(|x| 0.6 * x / n).collect();
        for _ in 0..4 {
            let u = rng.gaussian_vec(4);
            let w = rng.uniform(0.05, 0.25);
            st.w.rank1_update(&u, w).unwrap();
            for i in 0..2 {
                st.w_slots[i].rank1_update(&u[i * 2..(i + 1) * 2], w).unwrap();
            }
        }
        let sets = testutil::random_itemsets(&mut rng, 2, 2, 3);
        // independent score table
        let slates = enumerate_slates(&sets, 100).unwrap();
        let eta_sqrt = st.params.schedule.eta(st.t).sqrt();
        let mut best = f64::NEG_INFINITY;
        let mut best_pos = 0;
        for (pos, slate) in slates.iter().enumerate() {
            let sc = dot(slate.flat(), &st.theta)
                + eta_sqrt * mahalanobis_norm(slate.flat(), st.w.inverse()).unwrap();
            if sc > best {
                best = sc;
                best_pos = pos;
            }
        }
        let expect = position_to_indices(best_pos, &sets);
        let mut lrng = SplitMix64::new(56);
        let rec = baseline_step(
            &mut st,
            &sets,
            None,
            100,
            BaselineMode::Ofu,
            &mut lrng,
            |_, _| (0, 0.0),
        )
        .unwrap();
        assert_eq!(rec.slot_indices, expect);
    }

    #[test]
    fn baseline_greedy_limit_equals_per_slot_greedy_composition() {
        // With a negligible bonus (huge design matrix → tiny Mahalanobis
        // norms), the baseline argmax must agree with per-slot greedy.
        let mut rng = SplitMix64::new(57);
        let mut st = testutil::state(2, 2, 1.0);
        let v = rng.gaussian_vec(4);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        st.theta = v.iter().map(|x| 0.6 * x / n).collect();
        // Blow up W so the bonus is ~0 for every slate.
        for i in 0..4 {
            let mut e = vec![0.0; 4];
            e[i] = 1.0;
            st.w.rank1_update(&e, 1e12).unwrap();
        }
        let sets = testutil::random_itemsets(&mut rng, 2, 2, 4);
        let mut lrng = SplitMix64::new(58);
        let rec = baseline_step(
            &mut st,
            &sets,
            None,
            100,
            BaselineMode::Ofu,
            &mut lrng,
            |_, _| (0, 0.0),
        )
        .unwrap();
        for i in 0..2 {
            let th = st.theta_slot(i);
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0;
            for (j, x) in sets[i].iter().enumerate() {
                let d = dot(x, th);
                if d > best {
                    best = d;
                    best_j = j;
                }
            }
            assert_eq!(rec.slot_indices[i], best_j, "slot {i}");
        }
    }

    #[test]
    fn design_matrix_reconstructs_from_round_log() {
        // After T rounds, W must equal I plus the weighted outer products of
        // the non-banked rounds, each weighted by dmu at the *adopted* next
        // estimate — replayed here from a log of (slate, theta_next).
        let mut rng = SplitMix64::new(59);
        let mut reward_rng = SplitMix64::new(60);
        let mut st = testutil::state(2, 2, 1.0);
        let mut log: Vec<(Slate, Vec<f64>, bool)> = Vec::new();
        for _ in 0..60 {
            let sets = testutil::random_itemsets(&mut rng, 2, 2, 3);
            let before_t = st.t;
            let rec = step_ofu(&mut st, &sets, |slate, _| {
                let z = dot(slate.flat(), &[0.3, -0.2, 0.25, 0.1]);
                (coin(&mut reward_rng, z), 0.0)
            })
            .unwrap();
            assert_eq!(rec.t, before_t);
            let slate = Slate::from_indices(&sets, &rec.slot_indices).unwrap();
            log.push((slate, st.theta.clone(), rec.warmup_round));
        }
        let mut w = crate::linalg::SymMatrix::identity(4);
        for (slate, theta_next, warmup) in &log {
            if *warmup {
                continue;
            }
            let weight = crate::glm::dmu(dot(slate.flat(), theta_next));
            w.add_scaled_outer(slate.flat(), weight).unwrap();
        }
        for i in 0..4 {
            for j in 0..4 {
                let got = st.w.matrix().get(i, j);
                let expect = w.get(i, j);
                assert!(
                    (got - expect).abs() <= 1e-8 * expect.abs().max(1.0),
                    "({i},{j}): {got} vs {expect}"
                );
            }
        }
        st.check_invariants().unwrap();
    }

    #[test]
    fn position_indices_roundtrip() {
        let mut rng = SplitMix64::new(61);
        let sets = testutil::random_itemsets(&mut rng, 3, 2, 3);
        let slates = enumerate_slates(&sets, 100).unwrap();
        for (pos, slate) in slates.iter().enumerate() {
            let idx = position_to_indices(pos, &sets);
            let rebuilt = Slate::from_indices(&sets, &idx).unwrap();
            assert_eq!(slate.flat(), rebuilt.flat());
        }
    }
}
