//! Synthetic logistic slate environments.
//!
//! An *instance* fixes the problem shape (slots, per-slot feature dimension,
//! items per slot), the context regime (one fixed item set, a finite family
//! of item sets, or fresh item sets every round), the item-norm style, and
//! the hidden parameter. Resolving an instance derives everything the
//! learners and the harness need: the hidden parameter itself, the norm
//! bound `s`, the worst-case slate norm, and the curvature bound `kappa`.
//!
//! Randomness is split into independent streams so that runs are *paired*:
//! for a given seed, every algorithm sees the identical context sequence and
//! the identical reward coin-flips. Structure (hidden parameter, prebuilt
//! item sets) comes from instance-level streams, per-round contexts from a
//! context stream, rewards from a reward stream, and learner-internal noise
//! (posterior perturbations) from a learner stream. Exactly one reward
//! uniform is consumed per round, and the context stream consumption per
//! round does not depend on the algorithm.

use crate::glm::{self, GlmError};
use crate::rng::{self, SplitMix64};
use std::borrow::Cow;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid instance: {0}")]
    Invalid(&'static str),
    #[error("fixed norm bound {got} is below the hidden parameter norm {needed}")]
    SBoundTooSmall { needed: f64, got: f64 },
    #[error(transparent)]
    Glm(#[from] GlmError),
}

/// How item sets vary over rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextMode {
    /// One item set per slot, drawn once and reused every round.
    Fixed,
    /// A finite family of item-set collections; each round picks one
    /// uniformly.
    Finite(u32),
    /// Fresh item sets every round.
    Infinite,
}

/// How individual item vectors are drawn inside the radius-`1/sqrt(slots)`
/// ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormStyle {
    /// Uniform over the solid ball (norms vary).
    BallUniform,
    /// Uniform over the cube [-1,1]^d, then rescaled so every item norm is
    /// exactly the radius (directions carry the cube's corner bias).
    BoxNormalized,
}

/// Whether the hidden parameter keeps its raw draw or is normalized to unit
/// length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaNorm {
    Raw,
    Normalized,
}

/// The norm bound `s` handed to the learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SBound {
    /// Use the exact norm of the hidden parameter (tightest admissible).
    Exact,
    /// Use a stated bound; must dominate the hidden parameter's norm.
    Fixed(f64),
}

/// Shape and regime of a synthetic problem. `seed` controls only the
/// instance structure (hidden parameter, prebuilt item sets); per-run
/// randomness is derived separately by the harness.
#[derive(Debug, Clone)]
pub struct Instance {
    pub slots: usize,
    pub dim: usize,
    pub items_per_slot: usize,
    pub mode: ContextMode,
    pub norm_style: NormStyle,
    pub theta_norm: ThetaNorm,
    pub s_bound: SBound,
    pub seed: u64,
}

/// Item sets for one round: `sets[slot][item][coordinate]`.
pub type ItemSets = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone)]
enum Prebuilt {
    None,
    Fixed(ItemSets),
    Finite(Vec<ItemSets>),
}

/// An instance with all derived quantities materialized.
#[derive(Debug, Clone)]
pub struct ResolvedInstance {
    pub instance: Instance,
    pub theta_star: Vec<f64>,
    /// Norm bound handed to learners; always >= ||theta_star||.
    pub s: f64,
    /// Worst-case slate norm (1 in general; exact for fixed item sets).
    pub max_slate_norm: f64,
    /// Curvature bound `1 / dmu(s * max_slate_norm)`.
    pub kappa: f64,
    prebuilt: Prebuilt,
}

fn draw_item(rng: &mut SplitMix64, dim: usize, radius: f64, style: NormStyle) -> Vec<f64> {
    match style {
        NormStyle::BallUniform => {
            // Sphere-uniform direction times U^{1/d} radius scaling.
            let v = loop {
                let v = rng.gaussian_vec(dim);
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if n > 1e-12 {
                    break v.into_iter().map(|x| x / n).collect::<Vec<f64>>();
                }
            };
            let u = rng.next_f64();
            let r = radius * u.powf(1.0 / dim as f64);
            v.into_iter().map(|c| c * r).collect()
        }
        NormStyle::BoxNormalized => loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                return v.into_iter().map(|c| c * (radius / n)).collect();
            }
        },
    }
}

fn draw_itemsets(rng: &mut SplitMix64, inst: &Instance, radius: f64) -> ItemSets {
    (0..inst.slots)
        .map(|_| {
            (0..inst.items_per_slot)
                .map(|_| draw_item(rng, inst.dim, radius, inst.norm_style))
                .collect()
        })
        .collect()
}

impl Instance {
    pub fn flat_dim(&self) -> usize {
        self.slots * self.dim
    }

    /// Per-slot item norm cap `1/sqrt(slots)`, so slate norms stay <= 1.
    pub fn slot_radius(&self) -> f64 {
        1.0 / (self.slots as f64).sqrt()
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.slots == 0 {
            return Err(EnvError::Invalid("slots must be at least 1"));
        }
        if self.dim == 0 {
            return Err(EnvError::Invalid("dim must be at least 1"));
        }
        if self.items_per_slot == 0 {
            return Err(EnvError::Invalid("items_per_slot must be at least 1"));
        }
        if let ContextMode::Finite(c) = self.mode {
            if c == 0 {
                return Err(EnvError::Invalid("a finite context family needs at least 1 member"));
            }
        }
        if let SBound::Fixed(s) = self.s_bound {
            if !(s > 0.0) || !s.is_finite() {
                return Err(EnvError::Invalid("fixed norm bound must be positive and finite"));
            }
        }
        Ok(())
    }

    /// Draw the hidden parameter: coordinates uniform on [-1, 1], optionally
    /// normalized to unit length.
    pub fn gen_theta_star(&self) -> Vec<f64> {
        let mut rng = SplitMix64::stream(self.seed, rng::TAG_THETA_STAR);
        let mut theta: Vec<f64> = (0..self.flat_dim()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        if self.theta_norm == ThetaNorm::Normalized {
            let n = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                for x in &mut theta {
                    *x /= n;
                }
            } else {
                theta = vec![0.0; self.flat_dim()];
                theta[0] = 1.0;
            }
        }
        theta
    }

    /// Materialize the hidden parameter, any prebuilt item sets, and the
    /// derived bounds.
    pub fn resolve(&self) -> Result<ResolvedInstance, EnvError> {
        self.validate()?;
        let theta_star = self.gen_theta_star();
        let theta_norm = theta_star.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = match self.s_bound {
            SBound::Exact => {
                if theta_norm <= 0.0 {
                    return Err(EnvError::Invalid("hidden parameter has zero norm"));
                }
                theta_norm
            }
            SBound::Fixed(v) => {
                if v < theta_norm {
                    return Err(EnvError::SBoundTooSmall { needed: theta_norm, got: v });
                }
                v
            }
        };
        let radius = self.slot_radius();
        let mut sets_rng = SplitMix64::stream(self.seed, rng::TAG_FIXED_SETS);
        let prebuilt = match self.mode {
            ContextMode::Fixed => Prebuilt::Fixed(draw_itemsets(&mut sets_rng, self, radius)),
            ContextMode::Finite(c) => Prebuilt::Finite(
                (0..c).map(|_| draw_itemsets(&mut sets_rng, self, radius)).collect(),
            ),
            ContextMode::Infinite => Prebuilt::None,
        };
        // Slate norms obey sum_i ||x_i||^2 <= slots * radius^2 = 1. For a
        // fixed item set the exact maximum is known and tighter.
        let max_slate_norm = match &prebuilt {
            Prebuilt::Fixed(sets) => {
                let mut acc = 0.0;
                for slot in sets {
                    let m = slot
                        .iter()
                        .map(|x| x.iter().map(|c| c * c).sum::<f64>())
                        .fold(0.0f64, f64::max);
                    acc += m;
                }
                acc.sqrt().min(1.0)
            }
            _ => 1.0,
        };
        let kappa = glm::kappa_bound(s, max_slate_norm)?;
        Ok(ResolvedInstance { instance: self.clone(), theta_star, s, max_slate_norm, kappa, prebuilt })
    }
}

impl ResolvedInstance {
    pub fn slots(&self) -> usize {
        self.instance.slots
    }

    pub fn dim(&self) -> usize {
        self.instance.dim
    }

    pub fn flat_dim(&self) -> usize {
        self.instance.flat_dim()
    }

    /// Item sets for the next round. Consumes a fixed number of context-rng
    /// draws per call for a given instance shape, independent of the
    /// algorithm consuming the sets.
    pub fn itemsets_for_round(&self, ctx_rng: &mut SplitMix64) -> Cow<'_, ItemSets> {
        match &self.prebuilt {
            Prebuilt::Fixed(sets) => Cow::Borrowed(sets),
            Prebuilt::Finite(family) => {
                let pick = ctx_rng.below(family.len());
                Cow::Borrowed(&family[pick])
            }
            Prebuilt::None => Cow::Owned(draw_itemsets(
                ctx_rng,
                &self.instance,
                self.instance.slot_radius(),
            )),
        }
    }

    /// Expected reward of the slate assembled from `indices`.
    pub fn expected_mu(&self, sets: &ItemSets, indices: &[usize]) -> f64 {
        glm::mu(self.slate_dot(sets, indices))
    }

    /// `<slate, theta_star>` accumulated slot by slot (same association order
    /// as `best_slate_dot`, so comparisons are exact).
    pub fn slate_dot(&self, sets: &ItemSets, indices: &[usize]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for (i, &j) in indices.iter().enumerate() {
            let x = &sets[i][j];
            let th = &self.theta_star[i * d..(i + 1) * d];
            acc += x.iter().zip(th).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    }

    /// The reward-optimal slate decomposes per slot because the slate dot
    /// product is a sum of slot dot products and the link is increasing.
    pub fn best_slate(&self, sets: &ItemSets) -> (Vec<usize>, f64) {
        let d = self.dim();
        let mut indices = Vec::with_capacity(self.slots());
        let mut total = 0.0;
        for (i, slot) in sets.iter().enumerate() {
            let th = &self.theta_star[i * d..(i + 1) * d];
            let mut best_j = 0;
            let mut best_dot = f64::NEG_INFINITY;
            for (j, x) in slot.iter().enumerate() {
                let dot = x.iter().zip(th).map(|(a, b)| a * b).sum::<f64>();
                if dot > best_dot {
                    best_dot = dot;
                    best_j = j;
                }
            }
            indices.push(best_j);
            total += best_dot;
        }
        (indices, total)
    }

    /// Per-round regret `mu(best) - mu(chosen)`; nonnegative by
    /// construction.
    pub fn regret_increment(&self, sets: &ItemSets, chosen: &[usize]) -> f64 {
        let (_, best_dot) = self.best_slate(sets);
        let chosen_dot = self.slate_dot(sets, chosen);
        glm::mu(best_dot) - glm::mu(chosen_dot)
    }

    /// One Bernoulli reward with success probability `mu(z)`. Always
    /// consumes exactly one uniform.
    pub fn sample_reward(&self, z: f64, reward_rng: &mut SplitMix64) -> u8 {
        let u = reward_rng.next_f64();
        (u < glm::mu(z)) as u8
    }
}

/// Everything recorded about one interaction round.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub t: u64,
    pub slot_indices: Vec<usize>,
    pub reward: u8,
    pub regret_increment: f64,
    pub pull_ns: u64,
    pub update_ns: u64,
    /// True when the adaptivity check failed and the round fed the warm-up
    /// history instead of the online update.
    pub warmup_round: bool,
    /// Posterior-perturbation rejections this round (sampling algorithms).
    pub rejection_count: u64,
    /// Smallest eigenvalue of each slot design matrix, when sampled.
    pub slot_min_eigs: Option<Vec<f64>>,
}
