//! Slate selection rules.
//!
//! The slate score used everywhere is linear-plus-bonus in the concatenated
//! vector, and both parts decompose across slots: the linear term because the
//! dot product splits block by block, the bonus because the slot design
//! matrices are maintained separately. Each selection is therefore N
//! independent per-slot argmaxes, with ties broken toward the lowest item
//! index so runs are reproducible.

use super::{BanditError, OnlineState, SelectionResult, Slate};
use crate::linalg::{self, SymMatrix};
use crate::optim::AdmissibleSet;
use crate::rng::SplitMix64;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate_itemsets(itemsets: &[Vec<Vec<f64>>], slots: usize, dim: usize) -> Result<(), BanditError> {
    if itemsets.len() != slots {
        return Err(BanditError::DimensionMismatch { expected: slots, got: itemsets.len() });
    }
    for (i, set) in itemsets.iter().enumerate() {
        if set.is_empty() {
            return Err(BanditError::EmptyItemSet { slot: i });
        }
        for item in set {
            if item.len() != dim {
                return Err(BanditError::DimensionMismatch { expected: dim, got: item.len() });
            }
        }
    }
    Ok(())
}

/// Per-slot argmax of `<x, theta_i> + bonus_scale * ||x||_{(W_i)^-1}`.
/// Exposed with an explicit bonus scale so tests can force the greedy
/// (`bonus_scale = 0`) and pure-exploration (`theta = 0`) corners.
pub fn select_with_bonus(
    state: &OnlineState,
    itemsets: &[Vec<Vec<f64>>],
    bonus_scale: f64,
) -> Result<SelectionResult, BanditError> {
    validate_itemsets(itemsets, state.slots(), state.dim())?;
    let mut indices = Vec::with_capacity(state.slots());
    let mut per_slot = Vec::with_capacity(state.slots());
    let mut scores = Vec::with_capacity(state.slots());
    let mut bonuses = Vec::with_capacity(state.slots());
    for i in 0..state.slots() {
        let theta_i = state.theta_slot(i);
        let w_inv = state.w_slots[i].inverse();
        let mut best_j = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        let mut best_bonus = 0.0;
        for (j, x) in itemsets[i].iter().enumerate() {
            let bonus = if bonus_scale == 0.0 {
                0.0
            } else {
                bonus_scale * linalg::mahalanobis_norm(x, w_inv)?
            };
            let score = dot(x, theta_i) + bonus;
            if score > best_score {
                best_score = score;
                best_j = j;
                best_bonus = bonus;
            }
        }
        indices.push(best_j);
        per_slot.push(itemsets[i][best_j].clone());
        scores.push(best_score);
        bonuses.push(best_bonus);
    }
    Ok(SelectionResult { indices, slate: Slate::new(per_slot)?, per_slot_scores: scores, bonus_terms: bonuses })
}

/// Optimistic selection: the bonus scale is the square root of the optimism
/// schedule at the current round.
pub fn ofu_select(state: &OnlineState, itemsets: &[Vec<Vec<f64>>]) -> Result<SelectionResult, BanditError> {
    let eta = state.params.schedule.eta(state.t);
    select_with_bonus(state, itemsets, eta.sqrt())
}

/// One draw from the perturbation distribution: i.i.d. standard normal
/// coordinates.
pub fn dts_sample(dim: usize, rng: &mut SplitMix64) -> Vec<f64> {
    rng.gaussian_vec(dim)
}

/// Result of the rejection-sampling loop for the perturbed parameter.
#[derive(Debug, Clone)]
pub enum PerturbResult {
    /// Accepted draw plus how many draws were rejected before it.
    Accepted { theta: Vec<f64>, rejections: u64 },
    /// Every draw up to the cap fell outside the admissible set.
    Exhausted,
}

/// Slot-decomposed posterior perturbation with rejection against the
/// admissible set: `theta_i + scale * (W_i)^{-1/2} g_i` per slot, redrawn
/// until the concatenation is admissible or the cap is hit.
pub fn ts_perturb(state: &OnlineState, rng: &mut SplitMix64, scale: f64) -> Result<PerturbResult, BanditError> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(BanditError::InvalidParameter { name: "scale", why: "must be positive and finite" });
    }
    // The matrix roots depend only on state, not on the draw: hoist them out
    // of the rejection loop.
    let roots: Vec<SymMatrix> = state
        .w_slots
        .iter()
        .map(|m| linalg::inv_sqrt(m.matrix()))
        .collect::<Result<_, _>>()?;
    perturb_loop(&state.theta, state.dim(), &roots, &state.admissible, state.params.rejection_cap, rng, scale)
}

fn perturb_loop(
    theta: &[f64],
    dim: usize,
    roots: &[SymMatrix],
    admissible: &AdmissibleSet,
    cap: u64,
    rng: &mut SplitMix64,
    scale: f64,
) -> Result<PerturbResult, BanditError> {
    let mut rejections = 0u64;
    loop {
        let mut cand = theta.to_vec();
        for (i, root) in roots.iter().enumerate() {
            let g = dts_sample(dim, rng);
            let shift = root.matvec(&g)?;
            for (k, s) in shift.iter().enumerate() {
                cand[i * dim + k] += scale * s;
            }
        }
        if admissible.membership(&cand) {
            return Ok(PerturbResult::Accepted { theta: cand, rejections });
        }
        rejections += 1;
        if rejections >= cap {
            return Ok(PerturbResult::Exhausted);
        }
    }
}

/// Full-dimension perturbation used by the enumerating baseline:
/// `theta + scale * W^{-1/2} g` with the slate-level design matrix.
pub fn ts_perturb_joint(state: &OnlineState, rng: &mut SplitMix64, scale: f64) -> Result<PerturbResult, BanditError> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(BanditError::InvalidParameter { name: "scale", why: "must be positive and finite" });
    }
    let root = linalg::inv_sqrt(state.w.matrix())?;
    let nd = state.flat_dim();
    let mut rejections = 0u64;
    loop {
        let g = dts_sample(nd, rng);
        let shift = root.matvec(&g)?;
        let cand: Vec<f64> = state.theta.iter().zip(&shift).map(|(t, s)| t + scale * s).collect();
        if state.admissible.membership(&cand) {
            return Ok(PerturbResult::Accepted { theta: cand, rejections });
        }
        rejections += 1;
        if rejections >= state.params.rejection_cap {
            return Ok(PerturbResult::Exhausted);
        }
    }
}

/// Greedy selection under a (perturbed) parameter: per-slot linear argmax.
pub fn ts_select(
    theta_tilde: &[f64],
    itemsets: &[Vec<Vec<f64>>],
) -> Result<SelectionResult, BanditError> {
    if itemsets.is_empty() {
        return Err(BanditError::EmptyItemSet { slot: 0 });
    }
    let slots = itemsets.len();
    if theta_tilde.len() % slots != 0 {
        return Err(BanditError::DimensionMismatch { expected: slots, got: theta_tilde.len() });
    }
    let dim = theta_tilde.len() / slots;
    validate_itemsets(itemsets, slots, dim)?;
    let mut indices = Vec::with_capacity(slots);
    let mut per_slot = Vec::with_capacity(slots);
    let mut scores = Vec::with_capacity(slots);
    for i in 0..slots {
        let th = &theta_tilde[i * dim..(i + 1) * dim];
        let mut best_j = 0usize;
        let mut best = f64::NEG_INFINITY;
        for (j, x) in itemsets[i].iter().enumerate() {
            let sc = dot(x, th);
            if sc > best {
                best = sc;
                best_j = j;
            }
        }
        indices.push(best_j);
        per_slot.push(itemsets[i][best_j].clone());
        scores.push(best);
    }
    let bonus = vec![0.0; slots];
    Ok(SelectionResult { indices, slate: Slate::new(per_slot)?, per_slot_scores: scores, bonus_terms: bonus })
}

/// Uniform-random slate (the control policy).
pub fn random_select(itemsets: &[Vec<Vec<f64>>], rng: &mut SplitMix64) -> Result<SelectionResult, BanditError> {
    if itemsets.is_empty() {
        return Err(BanditError::EmptyItemSet { slot: 0 });
    }
    let mut indices = Vec::with_capacity(itemsets.len());
    let mut per_slot = Vec::with_capacity(itemsets.len());
    for (i, set) in itemsets.iter().enumerate() {
        if set.is_empty() {
            return Err(BanditError::EmptyItemSet { slot: i });
        }
        let j = rng.below(set.len());
        indices.push(j);
        per_slot.push(set[j].clone());
    }
    let slots = itemsets.len();
    Ok(SelectionResult {
        indices,
        slate: Slate::new(per_slot)?,
        per_slot_scores: vec![0.0; slots],
        bonus_terms: vec![0.0; slots],
    })
}

/// Lexicographic enumeration of the slate product space (first slot most
/// significant). Errors when the product exceeds `cap`.
pub fn enumerate_slates(itemsets: &[Vec<Vec<f64>>], cap: u64) -> Result<Vec<Slate>, BanditError> {
    if itemsets.is_empty() {
        return Err(BanditError::EmptyItemSet { slot: 0 });
    }
    let mut count: u128 = 1;
    for (i, set) in itemsets.iter().enumerate() {
        if set.is_empty() {
            return Err(BanditError::EmptyItemSet { slot: i });
        }
        count = count.saturating_mul(set.len() as u128);
    }
    if count > cap as u128 {
        return Err(BanditError::EnumerationTooLarge { count, cap });
    }
    let slots = itemsets.len();
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; slots];
    loop {
        out.push(Slate::from_indices(itemsets, &idx)?);
        // advance the least-significant (last) slot
        let mut pos = slots;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < itemsets[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}
