//! Posterior sampling with a fixed-length forced warm-up, for fixed item
//! sets.
//!
//! Phase 1 (rounds 1..=tau) ignores rewards for selection and plays the most
//! informative item per slot — the one with the largest norm in the inverse
//! warm-up metric — while banking every (slate, reward) pair. At round tau
//! the banked history is fit by a regularized MLE, which becomes both the
//! next estimate and the center of the confidence ellipsoid used from then
//! on. Phase 2 runs posterior-sampling rounds with the proximal update every
//! round; the curvature check is unnecessary because the warm-up already
//! guarantees the estimate sits in a benign region.

use super::select::{dts_sample, ts_select};
use super::update::solve_step;
use super::{BanditError, LearnerParams, OnlineState, Slate, TsScaleMode};
use crate::env::RoundRecord;
use crate::glm::dmu;
use crate::linalg::{self, mahalanobis_norm, MaintainedPsd, SymMatrix};
use crate::optim::{solve_regularized_mle, AdmissibleSet, LabelMode};
use crate::rng::SplitMix64;
use std::time::Instant;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct TsFixedParams {
    pub base: LearnerParams,
    /// Forced warm-up length; 0 skips straight to phase 2 with the ball set.
    pub tau: u64,
    /// Ridge weight of the warm-up metric and (halved) of the MLE.
    pub lambda_reg: f64,
}

#[derive(Debug, Clone)]
pub struct TsFixedLearner {
    state: OnlineState,
    v_h: MaintainedPsd,
    v_h_slots: Vec<MaintainedPsd>,
    tau: u64,
    lambda_reg: f64,
}

impl TsFixedLearner {
    pub fn new(slots: usize, dim: usize, params: TsFixedParams) -> Result<Self, BanditError> {
        if !(params.lambda_reg > 0.0) || !params.lambda_reg.is_finite() {
            return Err(BanditError::InvalidParameter {
                name: "lambda_reg",
                why: "must be positive and finite",
            });
        }
        let refresh = params.base.refresh_every;
        let state = OnlineState::new(slots, dim, params.base)?;
        let nd = slots * dim;
        Ok(TsFixedLearner {
            state,
            v_h: MaintainedPsd::scaled_identity(nd, params.lambda_reg, refresh)?,
            v_h_slots: (0..slots)
                .map(|_| MaintainedPsd::scaled_identity(dim, params.lambda_reg, refresh))
                .collect::<Result<_, _>>()?,
            tau: params.tau,
            lambda_reg: params.lambda_reg,
        })
    }

    pub fn state(&self) -> &OnlineState {
        &self.state
    }

    pub fn warmup_metric(&self) -> &MaintainedPsd {
        &self.v_h
    }

    pub fn warmup_slot_metrics(&self) -> &[MaintainedPsd] {
        &self.v_h_slots
    }

    pub fn in_forced_warmup(&self) -> bool {
        self.state.t <= self.tau
    }

    pub fn step(
        &mut self,
        itemsets: &[Vec<Vec<f64>>],
        rng: &mut SplitMix64,
        reward_fn: impl FnOnce(&Slate, &[usize]) -> (u8, f64),
    ) -> Result<RoundRecord, BanditError> {
        if self.in_forced_warmup() {
            self.warmup_step(itemsets, reward_fn)
        } else {
            self.sampling_step(itemsets, rng, reward_fn)
        }
    }

    /// Phase 1: per-slot argmax of the inverse-metric norm, bank the round,
    /// grow the warm-up metrics; fit the MLE when the phase ends.
    fn warmup_step(
        &mut self,
        itemsets: &[Vec<Vec<f64>>],
        reward_fn: impl FnOnce(&Slate, &[usize]) -> (u8, f64),
    ) -> Result<RoundRecord, BanditError> {
        let t = self.state.t;
        let slots = self.state.slots();
        let pull_start = Instant::now();
        let mut indices = Vec::with_capacity(slots);
        let mut per_slot = Vec::with_capacity(slots);
        for (i, set) in itemsets.iter().enumerate() {
            if set.is_empty() {
                return Err(BanditError::EmptyItemSet { slot: i });
            }
            let inv = self.v_h_slots[i].inverse();
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0usize;
            for (j, x) in set.iter().enumerate() {
                let n = mahalanobis_norm(x, inv)?;
                if n > best {
                    best = n;
                    best_j = j;
                }
            }
            indices.push(best_j);
            per_slot.push(set[best_j].clone());
        }
        let slate = Slate::new(per_slot)?;
        let pull_ns = pull_start.elapsed().as_nanos() as u64;

        let (reward, regret) = reward_fn(&slate, &indices);

        let update_start = Instant::now();
        self.state.history.push((slate.clone(), reward));
        let inv_kappa = 1.0 / self.state.params.kappa;
        self.v_h.rank1_update(slate.flat(), inv_kappa)?;
        let d = self.state.dim();
        for (i, vs) in self.v_h_slots.iter_mut().enumerate() {
            vs.rank1_update(&slate.flat()[i * d..(i + 1) * d], inv_kappa)?;
        }
        if t == self.tau {
            self.finalize_warmup()?;
        }
        self.state.t += 1;
        let update_ns = update_start.elapsed().as_nanos() as u64;

        Ok(RoundRecord {
            t,
            slot_indices: indices,
            reward,
            regret_increment: regret,
            pull_ns,
            update_ns,
            warmup_round: true,
            rejection_count: 0,
            slot_min_eigs: None,
        })
    }

    /// Fit the banked history and switch the admissible set to the
    /// ellipsoid `{ ||theta - theta_hat||_{V} <= beta_tau }` (note the
    /// *unsquared* norm: the squared-form radius is beta squared). The
    /// online design matrices are untouched during phase 1, so they restart
    /// phase 2 at the identity.
    fn finalize_warmup(&mut self) -> Result<(), BanditError> {
        let nd = self.state.flat_dim();
        let rows: Vec<(&[f64], u8)> =
            self.state.history.iter().map(|(s, y)| (s.flat(), *y)).collect();
        let theta_hat = solve_regularized_mle(
            nd,
            &rows,
            self.lambda_reg / 2.0,
            self.state.params.s,
            self.state.precision(),
            self.state.params.solver_max_iter,
        )?;
        let beta = self.state.params.schedule.beta(self.tau.max(1));
        let metric = self.v_h.matrix().clone();
        let set =
            AdmissibleSet::with_ellipsoid(f64::INFINITY, theta_hat.clone(), metric, beta * beta)?;
        self.state.theta = theta_hat.clone();
        self.state.theta_h = Some(theta_hat);
        self.state.admissible = set;
        Ok(())
    }

    /// Phase 2: slot-decomposed perturbation (rejection against the
    /// ellipsoid), greedy selection, then the proximal update with the
    /// observed label — no curvature check.
    fn sampling_step(
        &mut self,
        itemsets: &[Vec<Vec<f64>>],
        rng: &mut SplitMix64,
        reward_fn: impl FnOnce(&Slate, &[usize]) -> (u8, f64),
    ) -> Result<RoundRecord, BanditError> {
        let t = self.state.t;
        let pull_start = Instant::now();
        let eta = self.state.params.schedule.eta(t);
        let scale = match self.state.params.ts_scale {
            TsScaleMode::SqrtEta => eta.sqrt(),
            TsScaleMode::RawEta => eta,
        };
        let d = self.state.dim();
        let roots: Vec<SymMatrix> = self
            .state
            .w_slots
            .iter()
            .map(|m| linalg::inv_sqrt(m.matrix()))
            .collect::<Result<_, _>>()?;
        let mut rejections = 0u64;
        let theta_tilde = loop {
            let mut cand = self.state.theta.clone();
            for (i, root) in roots.iter().enumerate() {
                let g = dts_sample(d, rng);
                let shift = root.matvec(&g)?;
                for (k, s) in shift.iter().enumerate() {
                    cand[i * d + k] += scale * s;
                }
            }
            if self.state.admissible.membership(&cand) {
                break cand;
            }
            rejections += 1;
            if rejections >= self.state.params.rejection_cap {
                break self.state.theta.clone();
            }
        };
        let sel = ts_select(&theta_tilde, itemsets)?;
        let pull_ns = pull_start.elapsed().as_nanos() as u64;

        let (reward, regret) = reward_fn(&sel.slate, &sel.indices);

        let update_start = Instant::now();
        let mode = LabelMode::from_label(reward);
        let theta_next = solve_step(&self.state, sel.slate.flat(), mode)?;
        let weight = dmu(dot(sel.slate.flat(), &theta_next));
        self.state.w.rank1_update(sel.slate.flat(), weight)?;
        for (i, ws) in self.state.w_slots.iter_mut().enumerate() {
            ws.rank1_update(&sel.slate.flat()[i * d..(i + 1) * d], weight)?;
        }
        self.state.theta = theta_next;
        self.state.t += 1;
        let update_ns = update_start.elapsed().as_nanos() as u64;

        Ok(RoundRecord {
            t,
            slot_indices: sel.indices,
            reward,
            regret_increment: regret,
            pull_ns,
            update_ns,
            warmup_round: false,
            rejection_count: rejections,
            slot_min_eigs: None,
        })
    }
}
