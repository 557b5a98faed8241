//! The logistic link and its calculus, plus the scalar schedules.
//!
//! Rewards are Bernoulli with mean `mu(x^T theta)`, `mu(a) = 1/(1+e^-a)`.
//! Everything the learners need from the link is here: the link itself, its
//! first two derivatives, the cross-entropy loss in an overflow-safe form,
//! the worst-case inverse-slope constant `kappa`, and the self-concordance
//! inequalities that justify treating `mu_dot` as a slowly varying weight.
//!
//! The schedules `eta_t`, `gamma_t`, `beta_t` scale exploration bonuses,
//! ridge strengths, and confidence radii. Their shape is fixed
//! (`const * S^p * N * d * ln(t/delta)`); the leading constants are free
//! parameters surfaced in the experiment config, since only the shape — not
//! the absolute level — is meaningful at experimental scale.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GlmError {
    #[error("invalid parameter {name}={value}: {why}")]
    InvalidParameter { name: &'static str, value: f64, why: &'static str },
}

/// Logistic link, branch-stable: no overflow for any finite input.
#[inline]
pub fn mu(z: f64) -> f64 {
    debug_assert!(!z.is_nan(), "mu() requires a finite argument");
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// First derivative of the link: `mu(z) * (1 - mu(z))`, maximal (1/4) at 0.
///
/// Computed as `e / (1 + e)^2` with `e = exp(-|z|)` so the result is exactly
/// even in `z` and never overflows.
#[inline]
pub fn dmu(z: f64) -> f64 {
    debug_assert!(!z.is_nan(), "dmu() requires a finite argument");
    let e = (-z.abs()).exp();
    let denom = 1.0 + e;
    e / (denom * denom)
}

/// Second derivative of the link: `dmu(z) * (1 - 2*mu(z))`.
#[inline]
pub fn ddmu(z: f64) -> f64 {
    dmu(z) * (1.0 - 2.0 * mu(z))
}

/// `ln(1 + e^a)` without overflow.
#[inline]
fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// Cross-entropy loss of logit `z` against label `y` (0 or 1):
/// `-y ln mu(z) - (1-y) ln(1 - mu(z))`. Nonnegative for all inputs.
#[inline]
pub fn xent_loss(z: f64, y: u8) -> f64 {
    debug_assert!(y <= 1);
    if y == 1 {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Derivative of the loss in `z`: `mu(z) - y`.
#[inline]
pub fn xent_grad(z: f64, y: u8) -> f64 {
    debug_assert!(y <= 1);
    mu(z) - y as f64
}

/// Worst-case inverse link slope over the parameter ball: logits are bounded
/// by `s * max_slate_norm` in absolute value, and `dmu` is even and
/// decreasing in `|z|`, so the extremum sits on the boundary. Always >= 4,
/// approaching 4 as the logit range shrinks to zero.
pub fn kappa_bound(s: f64, max_slate_norm: f64) -> Result<f64, GlmError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(GlmError::InvalidParameter { name: "s", value: s, why: "must be positive and finite" });
    }
    if !(max_slate_norm > 0.0) || max_slate_norm > 1.0 {
        return Err(GlmError::InvalidParameter {
            name: "max_slate_norm",
            value: max_slate_norm,
            why: "must lie in (0, 1]",
        });
    }
    Ok(1.0 / dmu(s * max_slate_norm))
}

/// Self-concordance of the logistic link at a pair of logits: the curvature
/// is dominated by the slope (`|ddmu| <= dmu`), and the slope varies at most
/// exponentially in the logit gap (`dmu(a) <= dmu(b) * e^{|a-b|}`, both
/// directions). Returns whether all four inequalities hold.
pub fn self_concordance_check(z1: f64, z2: f64) -> bool {
    let gap = (z1 - z2).abs().exp();
    ddmu(z1).abs() <= dmu(z1)
        && ddmu(z2).abs() <= dmu(z2)
        && dmu(z1) <= dmu(z2) * gap
        && dmu(z2) <= dmu(z1) * gap
}

/// The three scalar schedules. All grow like `ln(t/delta)` and are strictly
/// positive and nondecreasing for `t >= 1` because `delta < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSchedule {
    pub c_eta: f64,
    pub c_gamma: f64,
    pub c_beta: f64,
    pub s: f64,
    pub slots: usize,
    pub dim: usize,
    pub delta: f64,
}

impl ScalarSchedule {
    pub fn new(
        c_eta: f64,
        c_gamma: f64,
        c_beta: f64,
        s: f64,
        slots: usize,
        dim: usize,
        delta: f64,
    ) -> Result<Self, GlmError> {
        for (name, value) in [("c_eta", c_eta), ("c_gamma", c_gamma), ("c_beta", c_beta)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GlmError::InvalidParameter { name, value, why: "must be positive and finite" });
            }
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(GlmError::InvalidParameter { name: "s", value: s, why: "must be positive and finite" });
        }
        if slots == 0 {
            return Err(GlmError::InvalidParameter { name: "slots", value: 0.0, why: "must be at least 1" });
        }
        if dim == 0 {
            return Err(GlmError::InvalidParameter { name: "dim", value: 0.0, why: "must be at least 1" });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(GlmError::InvalidParameter { name: "delta", value: delta, why: "must lie in (0, 1)" });
        }
        let sched = ScalarSchedule { c_eta, c_gamma, c_beta, s, slots, dim, delta };
        // Consistency: whenever the leading factors order the confidence
        // radius above the ridge strength, the full schedules must agree —
        // they share the same N*d*ln(t/delta) factor, so this is structural.
        if c_beta * s.powi(6) >= c_gamma * s.powi(2) {
            debug_assert!(sched.beta(1) >= sched.gamma(1));
        }
        Ok(sched)
    }

    #[inline]
    fn log_term(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        (t as f64 / self.delta).ln()
    }

    fn nd(&self) -> f64 {
        (self.slots * self.dim) as f64
    }

    /// Exploration-bonus scale.
    pub fn eta(&self, t: u64) -> f64 {
        self.c_eta * self.s.powi(2) * self.nd() * self.log_term(t)
    }

    /// Ridge strength for the warm-up estimator.
    pub fn gamma(&self, t: u64) -> f64 {
        self.c_gamma * self.s.powi(2) * self.nd() * self.log_term(t)
    }

    /// Confidence-set radius (squared-norm scale).
    pub fn beta(&self, t: u64) -> f64 {
        self.c_beta * self.s.powi(6) * self.nd() * self.log_term(t)
    }
}
