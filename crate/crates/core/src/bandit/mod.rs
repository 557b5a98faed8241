//! The slate learners: slot-decomposed optimistic selection, slot-decomposed
//! posterior sampling, their fixed-set warm-up variant, and the
//! slate-enumerating baselines they are benchmarked against.
//!
//! All learners share one online estimator: a proximal logistic step per
//! round whose admissibility is guarded by a curvature check. When the check
//! passes, the round costs a constant number of low-dimensional solves; when
//! it fails, the round is banked into a warm-up history that rebuilds a
//! confidence ellipsoid. The slot-decomposed learners differ from the
//! baselines only in *selection*: linear slate scores split across slots, so
//! a per-slot argmax replaces enumeration of the exponential slate space.

mod select;
mod steps;
mod ts_fixed;
mod update;

pub use select::{
    dts_sample, enumerate_slates, ofu_select, random_select, select_with_bonus, ts_perturb,
    ts_select, PerturbResult,
};
pub use steps::{baseline_step, step_ofu, step_ts, BaselineMode};
pub use ts_fixed::{TsFixedLearner, TsFixedParams};
pub use update::{adaptivity_check, online_update, warmup_update, AdaptivityOutcome, CheckSolutions};

use crate::glm::{GlmError, ScalarSchedule};
use crate::linalg::{LinalgError, MaintainedPsd};
use crate::optim::{AdmissibleSet, OptimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("slot {slot} has an empty item set")]
    EmptyItemSet { slot: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("slate enumeration would produce {count} slates, above the cap {cap}")]
    EnumerationTooLarge { count: u128, cap: u64 },
    #[error("invalid parameter {name}: {why}")]
    InvalidParameter { name: &'static str, why: &'static str },
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Glm(#[from] GlmError),
}

/// An N-slot action: per-slot item vectors plus their concatenation. The
/// concatenation is built at construction, so the two views never diverge.
#[derive(Debug, Clone, PartialEq)]
pub struct Slate {
    per_slot: Vec<Vec<f64>>,
    flat: Vec<f64>,
}

impl Slate {
    pub fn new(per_slot: Vec<Vec<f64>>) -> Result<Self, BanditError> {
        if per_slot.is_empty() {
            return Err(BanditError::EmptyItemSet { slot: 0 });
        }
        let d = per_slot[0].len();
        for (i, slot) in per_slot.iter().enumerate() {
            if slot.len() != d {
                return Err(BanditError::DimensionMismatch { expected: d, got: per_slot[i].len() });
            }
        }
        let mut flat = Vec::with_capacity(per_slot.len() * d);
        for slot in &per_slot {
            flat.extend_from_slice(slot);
        }
        Ok(Slate { per_slot, flat })
    }

    /// Assemble a slate by picking `indices[i]` from slot `i`'s item set.
    pub fn from_indices(itemsets: &[Vec<Vec<f64>>], indices: &[usize]) -> Result<Self, BanditError> {
        if itemsets.len() != indices.len() {
            return Err(BanditError::DimensionMismatch {
                expected: itemsets.len(),
                got: indices.len(),
            });
        }
        let per_slot: Vec<Vec<f64>> = itemsets
            .iter()
            .zip(indices)
            .map(|(set, &j)| set[j].clone())
            .collect();
        Slate::new(per_slot)
    }

    pub fn slots(&self) -> usize {
        self.per_slot.len()
    }

    pub fn dim(&self) -> usize {
        self.per_slot[0].len()
    }

    pub fn per_slot(&self) -> &[Vec<f64>] {
        &self.per_slot
    }

    pub fn slot(&self, i: usize) -> &[f64] {
        &self.per_slot[i]
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    /// The slot-`i` item embedded into the full space (zeros elsewhere).
    pub fn lifted(&self, i: usize) -> Vec<f64> {
        let d = self.dim();
        let mut v = vec![0.0; self.flat.len()];
        v[i * d..(i + 1) * d].copy_from_slice(&self.per_slot[i]);
        v
    }
}

/// Outcome of one selection: chosen indices, the assembled slate, and the
/// per-slot winning scores split into their linear and bonus parts.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub indices: Vec<usize>,
    pub slate: Slate,
    pub per_slot_scores: Vec<f64>,
    pub bonus_terms: Vec<f64>,
}

/// TS perturbation magnitude: the square root of the optimism schedule
/// (a standard-deviation-scale multiplier), or the raw schedule value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsScaleMode {
    SqrtEta,
    RawEta,
}

/// Everything a learner needs beyond its mutable state.
#[derive(Debug, Clone)]
pub struct LearnerParams {
    pub schedule: ScalarSchedule,
    pub s: f64,
    pub kappa: f64,
    pub ts_scale: TsScaleMode,
    pub solver_max_iter: usize,
    pub rejection_cap: u64,
    pub refresh_every: u32,
}

impl LearnerParams {
    pub fn validate(&self) -> Result<(), BanditError> {
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(BanditError::InvalidParameter { name: "s", why: "must be positive and finite" });
        }
        if !(self.kappa >= 4.0) || !self.kappa.is_finite() {
            return Err(BanditError::InvalidParameter {
                name: "kappa",
                why: "must be finite and at least 4 (the curvature bound's global minimum)",
            });
        }
        if self.solver_max_iter == 0 {
            return Err(BanditError::InvalidParameter { name: "solver_max_iter", why: "must be positive" });
        }
        if self.rejection_cap == 0 {
            return Err(BanditError::InvalidParameter { name: "rejection_cap", why: "must be positive" });
        }
        if self.refresh_every == 0 {
            return Err(BanditError::InvalidParameter { name: "refresh_every", why: "must be positive" });
        }
        Ok(())
    }
}

/// Mutable learner memory shared by every algorithm in this module.
///
/// `w` is the slate-level design matrix over the full concatenated space and
/// `w_slots` are its per-slot diagonal blocks, maintained incrementally with
/// their inverses. `history` holds the rounds on which the curvature check
/// failed; they define the confidence ellipsoid inside `admissible`.
#[derive(Debug, Clone)]
pub struct OnlineState {
    pub t: u64,
    pub theta: Vec<f64>,
    pub w: MaintainedPsd,
    pub w_slots: Vec<MaintainedPsd>,
    pub history: Vec<(Slate, u8)>,
    pub theta_h: Option<Vec<f64>>,
    pub admissible: AdmissibleSet,
    pub params: LearnerParams,
    slots: usize,
    dim: usize,
}

impl OnlineState {
    pub fn new(slots: usize, dim: usize, params: LearnerParams) -> Result<Self, BanditError> {
        params.validate()?;
        if slots == 0 || dim == 0 {
            return Err(BanditError::InvalidParameter {
                name: "slots/dim",
                why: "must both be at least 1",
            });
        }
        let nd = slots * dim;
        let refresh = params.refresh_every;
        let admissible = AdmissibleSet::ball(params.s)?;
        Ok(OnlineState {
            t: 1,
            theta: vec![0.0; nd],
            w: MaintainedPsd::identity(nd, refresh),
            w_slots: (0..slots).map(|_| MaintainedPsd::identity(dim, refresh)).collect(),
            history: Vec::new(),
            theta_h: None,
            admissible,
            params,
            slots,
            dim,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flat_dim(&self) -> usize {
        self.slots * self.dim
    }

    /// The slot-`i` block of the current parameter estimate.
    pub fn theta_slot(&self, i: usize) -> &[f64] {
        &self.theta[i * self.dim..(i + 1) * self.dim]
    }

    /// Solver precision for the current round.
    pub fn precision(&self) -> f64 {
        (1.0 / self.t as f64).max(crate::tol::SOLVER_MIN_PRECISION)
    }

    /// Checks the core state invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), BanditError> {
        let nd = self.flat_dim();
        if self.theta.len() != nd {
            return Err(BanditError::DimensionMismatch { expected: nd, got: self.theta.len() });
        }
        if self.admissible.violation(&self.theta) > 1e-6 {
            return Err(BanditError::InvalidParameter {
                name: "theta",
                why: "estimate drifted outside the admissible set",
            });
        }
        if self.history.len() as u64 > self.t {
            return Err(BanditError::InvalidParameter {
                name: "history",
                why: "more warm-up rounds than rounds played",
            });
        }
        // Diagonal blocks of the slate-level matrix must agree with the
        // slot-level matrices.
        let d = self.dim;
        for (i, ws) in self.w_slots.iter().enumerate() {
            for r in 0..d {
                for c in 0..d {
                    let big = self.w.matrix().get(i * d + r, i * d + c);
                    let small = ws.matrix().get(r, c);
                    if (big - small).abs() > 1e-8 * big.abs().max(1.0) {
                        return Err(BanditError::InvalidParameter {
                            name: "w_slots",
                            why: "slot block diverged from the slate-level matrix",
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::glm::ScalarSchedule;

    pub fn params(slots: usize, dim: usize, s: f64) -> LearnerParams {
        LearnerParams {
            schedule: ScalarSchedule::new(1.0, 1.0, 1.0, s, slots, dim, 0.05).unwrap(),
            s,
            kappa: crate::glm::kappa_bound(s, 1.0).unwrap(),
            ts_scale: TsScaleMode::SqrtEta,
            solver_max_iter: 10_000,
            rejection_cap: 10_000,
            refresh_every: 256,
        }
    }

    pub fn state(slots: usize, dim: usize, s: f64) -> OnlineState {
        OnlineState::new(slots, dim, params(slots, dim, s)).unwrap()
    }

    /// Random item sets with per-slot norms below `1/sqrt(slots)`.
    pub fn random_itemsets(
        rng: &mut crate::rng::SplitMix64,
        slots: usize,
        dim: usize,
        k: usize,
    ) -> Vec<Vec<Vec<f64>>> {
        let radius = 1.0 / (slots as f64).sqrt();
        (0..slots)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        let v = rng.gaussian_vec(dim);
                        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
                        let r = radius * rng.next_f64().powf(1.0 / dim as f64);
                        v.into_iter().map(|x| x * r / n).collect()
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slate_flat_is_exact_concatenation() {
        let s = Slate::new(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(s.flat(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.slots(), 3);
        assert_eq!(s.dim(), 2);
        for i in 0..3 {
            assert_eq!(&s.flat()[i * 2..(i + 1) * 2], s.slot(i));
        }
    }

    #[test]
    fn lift_identity_sums_to_flat() {
        let s = Slate::new(vec![vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap();
        let mut acc = vec![0.0; 4];
        for i in 0..2 {
            for (a, b) in acc.iter_mut().zip(s.lifted(i)) {
                *a += b;
            }
        }
        assert_eq!(acc.as_slice(), s.flat());
    }

    #[test]
    fn slate_rejects_ragged_slots() {
        assert!(Slate::new(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Slate::new(vec![]).is_err());
    }

    #[test]
    fn new_state_is_at_the_origin_with_identity_design() {
        let st = testutil::state(3, 4, 1.0);
        assert_eq!(st.t, 1);
        assert_eq!(st.theta, vec![0.0; 12]);
        assert!(st.history.is_empty());
        assert!(st.theta_h.is_none());
        assert!(!st.admissible.has_ellipsoid());
        for i in 0..12 {
            assert_eq!(st.w.matrix().get(i, i), 1.0);
        }
        st.check_invariants().unwrap();
    }

    #[test]
    fn state_rejects_bad_parameters() {
        let mut p = testutil::params(2, 2, 1.0);
        p.kappa = 2.0;
        assert!(OnlineState::new(2, 2, p).is_err());
        let mut p = testutil::params(2, 2, 1.0);
        p.s = f64::INFINITY;
        assert!(OnlineState::new(2, 2, p).is_err());
        let p = testutil::params(2, 2, 1.0);
        assert!(OnlineState::new(0, 2, p).is_err());
    }
}
