//! Constrained solvers for the penalized logistic objectives.
//!
//! Every optimization in this crate is the minimization of a smooth convex
//! function over the intersection of a centered norm ball (the prior bound
//! on the unknown parameter) with at most one ellipsoid (the confidence set
//! built from warm-up rounds). That structure is served by:
//!
//! - exact closed-form ball projection;
//! - ellipsoid projection via a one-dimensional monotone root-find on the
//!   KKT multiplier, done in the metric's eigenbasis (the eigenbasis is
//!   prepared once per confidence-set rebuild and reused);
//! - Dykstra's alternating projections for the intersection — plain
//!   alternating projection converges to a feasible point, Dykstra's
//!   correction terms make it converge to the *nearest* one;
//! - projected gradient descent with Armijo backtracking. The objectives
//!   are gradient-Lipschitz with an explicit constant, so the nominal step
//!   `1/L` almost always passes the sufficient-decrease test; backtracking
//!   is a safety net, not the workhorse.
//!
//! The solver terminates on the gradient-mapping norm
//! `||theta - project(theta - s*grad)|| / s` at the nominal step, which is
//! zero exactly at constrained stationary points. All routines are
//! deterministic: identical inputs produce bit-identical outputs.

use crate::glm::{dmu, mu, xent_loss};
use crate::linalg::{self, LinalgError, SymMatrix};
use crate::tol;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("admissible set is empty or numerically infeasible")]
    InfeasibleSet,
    #[error("ellipsoid projection root-find did not converge (residual {residual})")]
    RootFindFailed { residual: f64 },
    #[error("alternating projections stalled (residual {residual})")]
    ProjectionStalled { residual: f64 },
    #[error("solver hit the iteration cap (gradient mapping {gradient_mapping})")]
    IterationCap { gradient_mapping: f64 },
    #[error("line search failed to find sufficient decrease (gradient mapping {gradient_mapping})")]
    LineSearchFailed { gradient_mapping: f64 },
    #[error("invalid parameter {name}: {why}")]
    InvalidParameter { name: &'static str, why: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the origin-centered ball of radius `s`.
/// An infinite radius is the whole space.
pub fn project_ball(theta: &[f64], s: f64) -> Vec<f64> {
    debug_assert!(s > 0.0);
    let n = norm2(theta);
    if n <= s {
        theta.to_vec()
    } else {
        let scale = s / n;
        theta.iter().map(|x| x * scale).collect()
    }
}

/// Ellipsoid `{theta : (theta-center)^T metric (theta-center) <= radius_sq}`
/// with the metric's eigendecomposition cached for fast repeated projection.
#[derive(Debug, Clone)]
struct PreppedEllipsoid {
    center: Vec<f64>,
    metric: SymMatrix,
    radius_sq: f64,
    eigvals: Vec<f64>,
    /// Row-major orthogonal matrix; column j is the eigenvector of eigvals[j].
    eigvecs: Vec<f64>,
}

impl PreppedEllipsoid {
    fn new(center: Vec<f64>, metric: SymMatrix, radius_sq: f64) -> Result<Self, OptimError> {
        if center.len() != metric.dim() {
            return Err(OptimError::DimensionMismatch { expected: metric.dim(), got: center.len() });
        }
        if !center.iter().all(|x| x.is_finite()) || !metric.is_finite() {
            return Err(OptimError::Linalg(LinalgError::NonFinite));
        }
        if !(radius_sq > 0.0) || !radius_sq.is_finite() {
            return Err(OptimError::InvalidParameter {
                name: "radius_sq",
                why: "must be positive and finite",
            });
        }
        let (eigvals, eigvecs) = linalg::sym_eigen(&metric)?;
        if eigvals[0] <= 0.0 {
            return Err(OptimError::Linalg(LinalgError::NotPositiveDefinite { value: eigvals[0] }));
        }
        Ok(PreppedEllipsoid { center, metric, radius_sq, eigvals, eigvecs })
    }

    fn quad(&self, theta: &[f64]) -> f64 {
        let z: Vec<f64> = theta.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.metric.quad_form(&z).expect("dimension checked at construction")
    }

    fn contains(&self, theta: &[f64]) -> bool {
        self.quad(theta) <= self.radius_sq * (1.0 + tol::MEMBERSHIP_REL_SLACK)
    }

    /// Nearest point (Euclidean) within the ellipsoid. KKT gives
    /// `z(nu) = (I + nu * V)^-1 z0` in centered coordinates; in the
    /// eigenbasis each coordinate shrinks by `1/(1 + nu * lambda_k)` and the
    /// multiplier solves a strictly decreasing scalar equation, found by
    /// bisection.
    fn project(&self, theta: &[f64], residual_tol: f64) -> Result<Vec<f64>, OptimError> {
        let n = self.center.len();
        let z0: Vec<f64> = theta.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let q0 = self.metric.quad_form(&z0)?;
        if q0 <= self.radius_sq {
            return Ok(theta.to_vec());
        }
        // Rotate into the eigenbasis: w = Q^T z0.
        let mut w = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.eigvecs[i * n + k] * z0[i];
            }
            w[k] = acc;
        }
        let beta = self.radius_sq;
        let g = |nu: f64| -> f64 {
            let mut acc = 0.0;
            for k in 0..n {
                let shrunk = w[k] / (1.0 + nu * self.eigvals[k]);
                acc += self.eigvals[k] * shrunk * shrunk;
            }
            acc
        };
        // g is strictly decreasing with g(0) = q0 > beta; an explicit upper
        // bracket comes from bounding every eigenvalue below by the smallest.
        let mut lo = 0.0;
        let mut hi = ((q0 / beta).sqrt() - 1.0) / self.eigvals[0];
        debug_assert!(g(hi) <= beta * (1.0 + 1e-12));
        let mut residual;
        for _ in 0..tol::ELLIPSOID_ROOT_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            let val = g(mid);
            residual = val - beta;
            if residual.abs() <= residual_tol * beta.max(1.0) {
                lo = mid;
                break;
            }
            if val > beta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = lo;
        residual = g(nu) - beta;
        if residual.abs() > 1e3 * residual_tol * beta.max(1.0) {
            return Err(OptimError::RootFindFailed { residual });
        }
        // Rotate back: theta = center + Q * (w_k / (1 + nu*lambda_k)).
        let mut out = self.center.clone();
        for k in 0..n {
            let shrunk = w[k] / (1.0 + nu * self.eigvals[k]);
            for i in 0..n {
                out[i] += self.eigvecs[i * n + k] * shrunk;
            }
        }
        Ok(out)
    }
}

/// The feasible parameter set: a centered ball, optionally intersected with
/// one confidence ellipsoid. The ellipsoid's metric eigendecomposition and
/// smallest eigenvalue are computed once at construction.
#[derive(Debug, Clone)]
pub struct AdmissibleSet {
    s: f64,
    ellipsoid: Option<PreppedEllipsoid>,
}

impl AdmissibleSet {
    /// Ball-only set. Radius must be positive and finite.
    pub fn ball(s: f64) -> Result<Self, OptimError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(OptimError::InvalidParameter { name: "s", why: "must be positive and finite" });
        }
        Ok(AdmissibleSet { s, ellipsoid: None })
    }

    /// Ball intersected with an ellipsoid. `s = f64::INFINITY` degenerates to
    /// the ellipsoid alone. Errors if the intersection is (numerically)
    /// empty, witnessed by the ball-clipped center falling outside the
    /// ellipsoid.
    pub fn with_ellipsoid(
        s: f64,
        center: Vec<f64>,
        metric: SymMatrix,
        radius_sq: f64,
    ) -> Result<Self, OptimError> {
        if !(s > 0.0) {
            return Err(OptimError::InvalidParameter { name: "s", why: "must be positive" });
        }
        let ell = PreppedEllipsoid::new(center, metric, radius_sq)?;
        let witness = if s.is_finite() { project_ball(&ell.center, s) } else { ell.center.clone() };
        if !ell.contains(&witness) {
            return Err(OptimError::InfeasibleSet);
        }
        Ok(AdmissibleSet { s, ellipsoid: Some(ell) })
    }

    pub fn radius(&self) -> f64 {
        self.s
    }

    pub fn has_ellipsoid(&self) -> bool {
        self.ellipsoid.is_some()
    }

    pub fn ellipsoid_center(&self) -> Option<&[f64]> {
        self.ellipsoid.as_ref().map(|e| e.center.as_slice())
    }

    pub fn ellipsoid_radius_sq(&self) -> Option<f64> {
        self.ellipsoid.as_ref().map(|e| e.radius_sq)
    }

    pub fn ellipsoid_metric(&self) -> Option<&SymMatrix> {
        self.ellipsoid.as_ref().map(|e| &e.metric)
    }

    /// Membership with a small multiplicative slack on both constraints.
    pub fn membership(&self, theta: &[f64]) -> bool {
        let ball_ok = norm2(theta) <= self.s * (1.0 + tol::MEMBERSHIP_REL_SLACK);
        let ell_ok = self.ellipsoid.as_ref().map_or(true, |e| e.contains(theta));
        ball_ok && ell_ok
    }

    /// Largest constraint violation in distance-like units (0 when feasible).
    pub fn violation(&self, theta: &[f64]) -> f64 {
        let mut v: f64 = if self.s.is_finite() { norm2(theta) - self.s } else { 0.0 };
        if let Some(e) = &self.ellipsoid {
            v = v.max(e.quad(theta).max(0.0).sqrt() - e.radius_sq.sqrt());
        }
        v.max(0.0)
    }

    /// Diameter of the set (used for the proximal weight): the ball diameter
    /// capped by the ellipsoid's widest axis.
    pub fn diameter(&self) -> f64 {
        let ball_diam = 2.0 * self.s;
        match &self.ellipsoid {
            None => ball_diam,
            Some(e) => ball_diam.min(2.0 * (e.radius_sq / e.eigvals[0]).sqrt()),
        }
    }

    /// Euclidean projection onto the set. Feasible inputs are returned
    /// unchanged (bit-identical).
    pub fn project(&self, theta: &[f64], dykstra_tol: f64) -> Result<Vec<f64>, OptimError> {
        if self.membership(theta) {
            return Ok(theta.to_vec());
        }
        match &self.ellipsoid {
            None => Ok(project_ball(theta, self.s)),
            Some(e) if !self.s.is_finite() => e.project(theta, tol::ELLIPSOID_ROOT_TOL),
            Some(e) => dykstra_ball_ellipsoid(theta, self.s, e, dykstra_tol),
        }
    }
}

/// Convenience wrapper with the crate-default inner tolerance.
pub fn project_admissible(theta: &[f64], set: &AdmissibleSet) -> Result<Vec<f64>, OptimError> {
    set.project(theta, tol::DYKSTRA_TOL)
}

/// Standalone ellipsoid projection (eigendecomposition performed per call).
pub fn project_ellipsoid(
    theta: &[f64],
    center: &[f64],
    metric: &SymMatrix,
    radius_sq: f64,
    residual_tol: f64,
) -> Result<Vec<f64>, OptimError> {
    let ell = PreppedEllipsoid::new(center.to_vec(), metric.clone(), radius_sq)?;
    ell.project(theta, residual_tol)
}

/// Dykstra's alternating projections onto ball ∩ ellipsoid.
fn dykstra_ball_ellipsoid(
    theta: &[f64],
    s: f64,
    ell: &PreppedEllipsoid,
    stop_tol: f64,
) -> Result<Vec<f64>, OptimError> {
    let witness = project_ball(&ell.center, s);
    if !ell.contains(&witness) {
        return Err(OptimError::InfeasibleSet);
    }
    let n = theta.len();
    let mut x = theta.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..tol::DYKSTRA_MAX_ITER {
        let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = project_ball(&xp, s);
        for i in 0..n {
            p[i] = xp[i] - y[i];
        }
        let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let x_new = ell.project(&yq, tol::ELLIPSOID_ROOT_TOL)?;
        for i in 0..n {
            q[i] = yq[i] - x_new[i];
        }
        residual = x_new
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        x = x_new;
        if residual <= stop_tol {
            return Ok(x);
        }
    }
    Err(OptimError::ProjectionStalled { residual })
}

/// Label mode of one data term: a single binary label, or both labels at
/// once (the sum of the two losses, used by the imaginary-step estimator).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Zero,
    One,
    Both,
}

impl LabelMode {
    #[inline]
    fn loss(self, z: f64) -> f64 {
        match self {
            LabelMode::Zero => xent_loss(z, 0),
            LabelMode::One => xent_loss(z, 1),
            LabelMode::Both => xent_loss(z, 0) + xent_loss(z, 1),
        }
    }

    #[inline]
    fn dloss(self, z: f64) -> f64 {
        match self {
            LabelMode::Zero => mu(z),
            LabelMode::One => mu(z) - 1.0,
            LabelMode::Both => 2.0 * mu(z) - 1.0,
        }
    }

    /// Number of elementary loss terms (curvature multiplier).
    #[inline]
    fn multiplicity(self) -> f64 {
        match self {
            LabelMode::Both => 2.0,
            _ => 1.0,
        }
    }

    pub fn from_label(y: u8) -> Self {
        debug_assert!(y <= 1);
        if y == 1 {
            LabelMode::One
        } else {
            LabelMode::Zero
        }
    }
}

/// One logistic data term: feature vector plus label mode.
#[derive(Debug, Clone)]
pub struct DataTerm {
    pub x: Vec<f64>,
    pub mode: LabelMode,
}

/// `F(theta) = eta * ||theta - anchor||^2_W + sum_i loss_i(<x_i, theta>)`.
///
/// The proximal weight `eta` is `1/(2 + diam)` for a set of diameter `diam`,
/// hence always in (0, 1/2].
#[derive(Debug, Clone)]
pub struct PenalizedObjective {
    pub anchor: Vec<f64>,
    pub metric: SymMatrix,
    pub eta_weight: f64,
    pub data_terms: Vec<DataTerm>,
}

impl PenalizedObjective {
    pub fn new(
        anchor: Vec<f64>,
        metric: SymMatrix,
        eta_weight: f64,
        data_terms: Vec<DataTerm>,
    ) -> Result<Self, OptimError> {
        if anchor.len() != metric.dim() {
            return Err(OptimError::DimensionMismatch { expected: metric.dim(), got: anchor.len() });
        }
        if !(eta_weight > 0.0 && eta_weight <= 0.5) {
            return Err(OptimError::InvalidParameter {
                name: "eta_weight",
                why: "must lie in (0, 1/2]",
            });
        }
        for term in &data_terms {
            if term.x.len() != anchor.len() {
                return Err(OptimError::DimensionMismatch { expected: anchor.len(), got: term.x.len() });
            }
            if !term.x.iter().all(|v| v.is_finite()) {
                return Err(OptimError::Linalg(LinalgError::NonFinite));
            }
        }
        if !anchor.iter().all(|v| v.is_finite()) || !metric.is_finite() {
            return Err(OptimError::Linalg(LinalgError::NonFinite));
        }
        Ok(PenalizedObjective { anchor, metric, eta_weight, data_terms })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.value_grad(theta).0
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        self.value_grad(theta).1
    }

    pub fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let n = self.dim();
        let diff: Vec<f64> = theta.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        let w_diff = self.metric.matvec(&diff).expect("dimension fixed at construction");
        let quad = dot(&diff, &w_diff);
        let mut value = self.eta_weight * quad;
        let mut grad: Vec<f64> = w_diff.iter().map(|v| 2.0 * self.eta_weight * v).collect();
        for term in &self.data_terms {
            let z = dot(&term.x, theta);
            value += term.mode.loss(z);
            let d = term.mode.dloss(z);
            for i in 0..n {
                grad[i] += d * term.x[i];
            }
        }
        (value, grad)
    }

    /// Gradient Lipschitz bound: `2*eta*lambda_max(W) + sum curvature caps`.
    /// The logistic loss has curvature at most 1/4 per elementary term.
    pub fn lipschitz_bound(&self) -> f64 {
        let quad_part = 2.0 * self.eta_weight * self.metric.eig_max_upper_bound();
        let data_part: f64 = self
            .data_terms
            .iter()
            .map(|t| 0.25 * t.mode.multiplicity() * dot(&t.x, &t.x))
            .sum();
        quad_part + data_part
    }
}

/// Projected gradient descent with Armijo backtracking.
///
/// Terminates when the gradient-mapping norm at the nominal step `1/L` drops
/// to `precision`. Descent is enforced by the sufficient-decrease test up to
/// a machine-level absolute slack ([`tol::ARMIJO_F_SLACK`] scaled by
/// `1 + |f|`), so the output never exceeds the objective at the (projected)
/// starting point by more than a few ulps.
fn projected_gradient<F>(
    mut value_grad: F,
    set: &AdmissibleSet,
    x0: &[f64],
    lipschitz: f64,
    precision: f64,
    max_iter: usize,
) -> Result<Vec<f64>, OptimError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = set.project(x0, tol::DYKSTRA_TOL)?;
    let nominal_step = 1.0 / lipschitz.max(1e-12);
    let mut last_gm = f64::INFINITY;
    for _ in 0..max_iter {
        let (fx, g) = value_grad(&x);
        let target: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - nominal_step * b).collect();
        let cand0 = set.project(&target, tol::DYKSTRA_TOL)?;
        let gm: f64 = x
            .iter()
            .zip(&cand0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / nominal_step;
        last_gm = gm;
        if gm <= precision {
            return Ok(cand0);
        }
        let mut step = nominal_step;
        let mut cand = cand0;
        let mut halvings = 0;
        let slack = tol::ARMIJO_F_SLACK * (1.0 + fx.abs());
        loop {
            let (fc, _) = value_grad(&cand);
            let move_sq: f64 = x.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
            if fc <= fx - tol::ARMIJO_C * move_sq / step + slack {
                x = cand;
                break;
            }
            halvings += 1;
            if halvings > tol::ARMIJO_MAX_HALVINGS {
                return Err(OptimError::LineSearchFailed { gradient_mapping: gm });
            }
            step *= tol::ARMIJO_BETA;
            let target: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            cand = set.project(&target, tol::DYKSTRA_TOL)?;
        }
    }
    Err(OptimError::IterationCap { gradient_mapping: last_gm })
}

/// Minimize a [`PenalizedObjective`] over an [`AdmissibleSet`], warm-started
/// at the (projected) anchor.
pub fn solve_penalized(
    obj: &PenalizedObjective,
    set: &AdmissibleSet,
    precision: f64,
    max_iter: usize,
) -> Result<Vec<f64>, OptimError> {
    if !(precision > 0.0) {
        return Err(OptimError::InvalidParameter { name: "precision", why: "must be positive" });
    }
    let lip = obj.lipschitz_bound();
    projected_gradient(|th| obj.value_grad(th), set, &obj.anchor, lip, precision, max_iter)
}

/// Minimize `sum_i xent(<x_i, theta>, y_i) + gamma * ||theta||^2` over the
/// ball of radius `s`, started from the origin. An empty history is pure
/// ridge, whose constrained minimizer is the origin.
pub fn solve_regularized_mle(
    dim: usize,
    history: &[(&[f64], u8)],
    gamma: f64,
    s: f64,
    precision: f64,
    max_iter: usize,
) -> Result<Vec<f64>, OptimError> {
    if dim == 0 {
        return Err(OptimError::Linalg(LinalgError::ZeroDimension));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(OptimError::InvalidParameter { name: "gamma", why: "must be positive and finite" });
    }
    if !(precision > 0.0) {
        return Err(OptimError::InvalidParameter { name: "precision", why: "must be positive" });
    }
    for (x, y) in history {
        if x.len() != dim {
            return Err(OptimError::DimensionMismatch { expected: dim, got: x.len() });
        }
        if *y > 1 {
            return Err(OptimError::InvalidParameter { name: "label", why: "labels must be 0 or 1" });
        }
    }
    let set = AdmissibleSet::ball(s)?;
    let lip = 2.0 * gamma + 0.25 * history.iter().map(|(x, _)| dot(x, x)).sum::<f64>();
    let value_grad = |theta: &[f64]| -> (f64, Vec<f64>) {
        let mut value = gamma * dot(theta, theta);
        let mut grad: Vec<f64> = theta.iter().map(|v| 2.0 * gamma * v).collect();
        for (x, y) in history {
            let z = dot(x, theta);
            value += xent_loss(z, *y);
            let d = mu(z) - *y as f64;
            for i in 0..dim {
                grad[i] += d * x[i];
            }
        }
        (value, grad)
    };
    projected_gradient(value_grad, &set, &vec![0.0; dim], lip, precision, max_iter)
}

/// The proximal weight used with a set of the given diameter.
pub fn proximal_weight(diameter: f64) -> f64 {
    1.0 / (2.0 + diameter)
}

/// Curvature sanity check used by state invariants: `dmu` along a direction.
pub fn slope_at(x: &[f64], theta: &[f64]) -> f64 {
    dmu(dot(x, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_spd(rng: &mut SplitMix64, dim: usize, base: f64) -> SymMatrix {
        let mut m = SymMatrix::scaled_identity(dim, base);
        for _ in 0..(2 * dim) {
            let v: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            m.add_scaled_outer(&v, rng.uniform(0.05, 0.8)).unwrap();
        }
        m
    }

    // -- ball projection ----------------------------------------------------

    #[test]
    fn ball_interior_point_unchanged() {
        let theta = vec![0.1, -0.2, 0.05];
        assert_eq!(project_ball(&theta, 1.0), theta);
    }

    #[test]
    fn ball_exterior_point_rescaled() {
        let s = 1.5;
        let theta = vec![3.0, 0.0];
        let p = project_ball(&theta, s);
        assert!((p[0] - 1.5).abs() < 1e-15);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn ball_infinite_radius_is_identity() {
        let theta = vec![1e12, -4.0];
        assert_eq!(project_ball(&theta, f64::INFINITY), theta);
    }

    // -- ellipsoid projection -----------------------------------------------

    #[test]
    fn ellipsoid_interior_unchanged() {
        let metric = SymMatrix::identity(2);
        let theta = vec![0.1, 0.1];
        let p = project_ellipsoid(&theta, &[0.0, 0.0], &metric, 1.0, tol::ELLIPSOID_ROOT_TOL).unwrap();
        assert_eq!(p, theta);
    }

    #[test]
    fn ellipsoid_spherical_case_matches_radial_projection() {
        // V = I, radius_sq = r^2: projection is the radial clip toward center.
        let metric = SymMatrix::identity(3);
        let center = vec![1.0, -1.0, 0.5];
        let theta = vec![4.0, 2.0, 0.5];
        let r = 0.7f64;
        let p = project_ellipsoid(&theta, &center, &metric, r * r, tol::ELLIPSOID_ROOT_TOL).unwrap();
        let diff: Vec<f64> = theta.iter().zip(&center).map(|(a, c)| a - c).collect();
        let n = norm2(&diff);
        for i in 0..3 {
            let expect = center[i] + diff[i] * (r / n);
            assert!((p[i] - expect).abs() < 1e-9, "coord {i}");
        }
    }

    #[test]
    fn ellipsoid_projection_matches_boundary_sampling_oracle() {
        let mut rng = SplitMix64::new(777);
        for _ in 0..5 {
            let metric = random_spd(&mut rng, 3, 0.5);
            let center: Vec<f64> = (0..3).map(|_| rng.uniform(-0.5, 0.5)).collect();
            let radius_sq = rng.uniform(0.4, 1.5);
            let theta: Vec<f64> = (0..3).map(|_| rng.uniform(1.5, 3.0)).collect();
            let p =
                project_ellipsoid(&theta, &center, &metric, radius_sq, tol::ELLIPSOID_ROOT_TOL)
                    .unwrap();
            let dist = norm2(&theta.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>());
            // Oracle: dense sampling of the boundary. The projection of an
            // exterior point is on the boundary, so the sampled minimum
            // distance must approach `dist` from above.
            let mut best = f64::INFINITY;
            for _ in 0..1_000_000 {
                let dir = rng.gaussian_vec(3);
                let q = metric.quad_form(&dir).unwrap();
                let scale = (radius_sq / q).sqrt();
                let cand: Vec<f64> =
                    (0..3).map(|i| center[i] + dir[i] * scale).collect();
                let d = norm2(&theta.iter().zip(&cand).map(|(a, b)| a - b).collect::<Vec<_>>());
                if d < best {
                    best = d;
                }
            }
            assert!(best >= dist - 1e-9, "sampled point beat the projection");
            assert!(best - dist <= 1e-3, "projection {dist} vs sampled {best}");
            // And the projection itself is on the boundary:
            let z: Vec<f64> = p.iter().zip(&center).map(|(a, c)| a - c).collect();
            let q = metric.quad_form(&z).unwrap();
            assert!((q - radius_sq).abs() <= 1e-9 * radius_sq.max(1.0));
        }
    }

    #[test]
    fn ellipsoid_rejects_indefinite_metric() {
        let mut metric = SymMatrix::identity(2);
        metric.set(1, 1, -2.0);
        let r = project_ellipsoid(&[1.0, 1.0], &[0.0, 0.0], &metric, 1.0, 1e-12);
        assert!(matches!(r, Err(OptimError::Linalg(LinalgError::NotPositiveDefinite { .. }))));
    }

    // -- admissible set / Dykstra --------------------------------------------

    fn random_admissible(rng: &mut SplitMix64, dim: usize) -> AdmissibleSet {
        let s = rng.uniform(0.8, 2.0);
        if rng.next_f64() < 0.5 {
            AdmissibleSet::ball(s).unwrap()
        } else {
            let metric = random_spd(rng, dim, 0.5);
            let center: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.4, 0.4) * s).collect();
            let radius_sq = rng.uniform(0.3, 1.0) * s * s;
            AdmissibleSet::with_ellipsoid(s, center, metric, radius_sq).unwrap()
        }
    }

    #[test]
    fn admissible_member_point_returned_unchanged() {
        let mut rng = SplitMix64::new(12);
        for _ in 0..20 {
            let set = random_admissible(&mut rng, 3);
            // center-ish points are feasible for our construction
            let theta = match set.ellipsoid_center() {
                Some(c) => c.to_vec(),
                None => vec![0.0; 3],
            };
            let p = project_admissible(&theta, &set).unwrap();
            assert_eq!(p, theta);
        }
    }

    #[test]
    fn admissible_ball_only_equals_ball_projection() {
        let set = AdmissibleSet::ball(1.0).unwrap();
        let theta = vec![2.0, 2.0];
        assert_eq!(project_admissible(&theta, &set).unwrap(), project_ball(&theta, 1.0));
    }

    #[test]
    fn dykstra_matches_grid_minimizer_on_2d_sets() {
        let mut rng = SplitMix64::new(314);
        for _trial in 0..5 {
            let s = rng.uniform(0.8, 1.5);
            let metric = random_spd(&mut rng, 2, 0.5);
            let center: Vec<f64> = (0..2).map(|_| rng.uniform(-0.3, 0.3)).collect();
            let radius_sq = rng.uniform(0.4, 1.2);
            let set =
                AdmissibleSet::with_ellipsoid(s, center.clone(), metric.clone(), radius_sq).unwrap();
            let theta = vec![rng.uniform(1.0, 3.0), rng.uniform(-3.0, -1.0)];
            let p = project_admissible(&theta, &set).unwrap();
            let dist = norm2(&theta.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>());

            // Grid oracle over the bounding box of the ball.
            let g = 2001;
            let mut best = f64::INFINITY;
            for i in 0..g {
                let x = -s + 2.0 * s * (i as f64) / (g - 1) as f64;
                for j in 0..g {
                    let y = -s + 2.0 * s * (j as f64) / (g - 1) as f64;
                    let cand = [x, y];
                    if x * x + y * y > s * s {
                        continue;
                    }
                    let z = [cand[0] - center[0], cand[1] - center[1]];
                    if metric.quad_form(&z).unwrap() > radius_sq {
                        continue;
                    }
                    let d =
                        ((cand[0] - theta[0]).powi(2) + (cand[1] - theta[1]).powi(2)).sqrt();
                    if d < best {
                        best = d;
                    }
                }
            }
            assert!(dist <= best + 1e-3, "dykstra {dist} vs grid {best}");
            assert!(set.violation(&p) <= 1e-9);
        }
    }

    #[test]
    fn dykstra_distance_dominates_single_set_projections() {
        let mut rng = SplitMix64::new(2718);
        for _ in 0..20 {
            let s = rng.uniform(0.8, 1.5);
            let metric = random_spd(&mut rng, 3, 0.5);
            let center: Vec<f64> = (0..3).map(|_| rng.uniform(-0.3, 0.3)).collect();
            let radius_sq = rng.uniform(0.4, 1.2);
            let set =
                AdmissibleSet::with_ellipsoid(s, center.clone(), metric.clone(), radius_sq).unwrap();
            let theta: Vec<f64> = (0..3).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let joint = project_admissible(&theta, &set).unwrap();
            let d_joint = norm2(&theta.iter().zip(&joint).map(|(a, b)| a - b).collect::<Vec<_>>());
            let ball_p = project_ball(&theta, s);
            let d_ball = norm2(&theta.iter().zip(&ball_p).map(|(a, b)| a - b).collect::<Vec<_>>());
            let ell_p =
                project_ellipsoid(&theta, &center, &metric, radius_sq, tol::ELLIPSOID_ROOT_TOL)
                    .unwrap();
            let d_ell = norm2(&theta.iter().zip(&ell_p).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(d_joint >= d_ball - 1e-9);
            assert!(d_joint >= d_ell - 1e-9);
        }
    }

    #[test]
    fn infeasible_intersection_is_detected() {
        // Ellipsoid far outside the ball: clipped center misses it.
        let metric = SymMatrix::identity(2);
        let r = AdmissibleSet::with_ellipsoid(1.0, vec![10.0, 0.0], metric, 0.25);
        assert!(matches!(r, Err(OptimError::InfeasibleSet)));
    }

    // -- penalized objective ------------------------------------------------

    fn random_objective(rng: &mut SplitMix64, dim: usize, n_terms: usize) -> PenalizedObjective {
        let metric = random_spd(rng, dim, 1.0);
        let anchor: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let eta = rng.uniform(0.05, 0.5);
        let mut terms = Vec::new();
        for _ in 0..n_terms {
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.7, 0.7)).collect();
            let mode = match rng.below(3) {
                0 => LabelMode::Zero,
                1 => LabelMode::One,
                _ => LabelMode::Both,
            };
            terms.push(DataTerm { x, mode });
        }
        PenalizedObjective::new(anchor, metric, eta, terms).unwrap()
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..50 {
            let dim = 2 + rng.below(4);
            let n_terms = 1 + rng.below(4);
            let obj = random_objective(&mut rng, dim, n_terms);
            let theta: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let g = obj.grad(&theta);
            for i in 0..dim {
                let h = 1e-6 * (1.0 + theta[i].abs());
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let fd = (obj.value(&tp) - obj.value(&tm)) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()),
                    "coord {i}: fd {fd} vs analytic {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn objective_rejects_bad_eta() {
        let metric = SymMatrix::identity(2);
        assert!(PenalizedObjective::new(vec![0.0, 0.0], metric.clone(), 0.0, vec![]).is_err());
        assert!(PenalizedObjective::new(vec![0.0, 0.0], metric, 0.6, vec![]).is_err());
    }

    // -- solvers ------------------------------------------------------------

    #[test]
    fn solve_penalized_no_data_returns_anchor() {
        let metric = SymMatrix::identity(2);
        let anchor = vec![0.3, -0.2];
        let obj = PenalizedObjective::new(anchor.clone(), metric, 0.25, vec![]).unwrap();
        let set = AdmissibleSet::ball(1.0).unwrap();
        let sol = solve_penalized(&obj, &set, 1e-9, 10_000).unwrap();
        assert_eq!(sol, anchor);
    }

    #[test]
    fn solve_penalized_zero_feature_returns_projected_anchor() {
        let metric = SymMatrix::identity(2);
        let anchor = vec![3.0, 0.0]; // outside the unit ball
        let obj = PenalizedObjective::new(
            anchor.clone(),
            metric,
            0.25,
            vec![DataTerm { x: vec![0.0, 0.0], mode: LabelMode::One }],
        )
        .unwrap();
        let set = AdmissibleSet::ball(1.0).unwrap();
        let sol = solve_penalized(&obj, &set, 1e-10, 10_000).unwrap();
        let expected = project_ball(&anchor, 1.0);
        assert!(norm2(&sol.iter().zip(&expected).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-8);
    }

    /// Grid-search oracle for 2-dimensional constrained problems: evaluates F
    /// on every feasible node of a uniform grid over the ball's bounding box
    /// and returns the best value found.
    fn grid_oracle_value(
        f: &dyn Fn(&[f64]) -> f64,
        set: &AdmissibleSet,
        half_width: f64,
        nodes: usize,
    ) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..nodes {
            let x = -half_width + 2.0 * half_width * (i as f64) / (nodes - 1) as f64;
            for j in 0..nodes {
                let y = -half_width + 2.0 * half_width * (j as f64) / (nodes - 1) as f64;
                let cand = [x, y];
                if !set.membership(&cand) {
                    continue;
                }
                let v = f(&cand);
                if v < best {
                    best = v;
                }
            }
        }
        best
    }

    #[test]
    fn solve_penalized_matches_grid_oracle_in_2d() {
        let mut rng = SplitMix64::new(9);
        for _ in 0..3 {
            let obj = random_objective(&mut rng, 2, 2);
            let set = random_admissible(&mut rng, 2);
            let sol = solve_penalized(&obj, &set, 1e-8, 10_000).unwrap();
            let grid_best =
                grid_oracle_value(&|th| obj.value(th), &set, set.radius(), 2001);
            let got = obj.value(&sol);
            assert!((got - grid_best).abs() <= 1e-3, "solver {got} vs grid {grid_best}");
            assert!(set.violation(&sol) <= 1e-6);
        }
    }

    #[test]
    fn solve_penalized_never_worse_than_projected_anchor() {
        let mut rng = SplitMix64::new(10);
        for _ in 0..20 {
            let dim = 2 + rng.below(3);
            let obj = random_objective(&mut rng, dim, 3);
            let set = random_admissible(&mut rng, dim);
            // Random metrics can be near-singular, so the condition number --
            // and with it the linear rate of projected gradient -- is
            // unbounded here; ask for a precision the iteration budget can
            // honor on such instances.
            let sol = solve_penalized(&obj, &set, 1e-6, 50_000).unwrap();
            let start = project_admissible(&obj.anchor, &set).unwrap();
            assert!(obj.value(&sol) <= obj.value(&start) + 1e-8);
        }
    }

    #[test]
    fn solve_penalized_is_deterministic() {
        let mut rng = SplitMix64::new(11);
        let obj = random_objective(&mut rng, 3, 2);
        let set = random_admissible(&mut rng, 3);
        let a = solve_penalized(&obj, &set, 1e-8, 10_000).unwrap();
        let b = solve_penalized(&obj, &set, 1e-8, 10_000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regularized_mle_zero_feature_history_gives_origin() {
        let x = vec![0.0, 0.0];
        let history: Vec<(&[f64], u8)> = vec![(&x, 1)];
        let sol = solve_regularized_mle(2, &history, 1.0, 1.0, 1e-9, 10_000).unwrap();
        assert_eq!(sol, vec![0.0, 0.0]);
    }

    #[test]
    fn regularized_mle_empty_history_gives_origin() {
        let sol = solve_regularized_mle(3, &[], 0.5, 1.0, 1e-9, 10_000).unwrap();
        assert_eq!(sol, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn regularized_mle_matches_grid_oracle() {
        let mut rng = SplitMix64::new(13);
        let s = 1.2f64;
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2).map(|_| rng.uniform(-0.7, 0.7)).collect())
            .collect();
        let ys: Vec<u8> = (0..5).map(|_| (rng.next_f64() < 0.5) as u8).collect();
        let history: Vec<(&[f64], u8)> =
            xs.iter().zip(&ys).map(|(x, y)| (x.as_slice(), *y)).collect();
        let gamma = 0.35;
        let sol = solve_regularized_mle(2, &history, gamma, s, 1e-9, 10_000).unwrap();
        let f = |th: &[f64]| -> f64 {
            let mut v = gamma * dot(th, th);
            for (x, y) in &history {
                v += xent_loss(dot(x, th), *y);
            }
            v
        };
        let set = AdmissibleSet::ball(s).unwrap();
        let grid_best = grid_oracle_value(&f, &set, s, 2001);
        assert!((f(&sol) - grid_best).abs() <= 1e-3);
        assert!(norm2(&sol) <= s + 1e-9);
    }

    #[test]
    fn regularized_mle_gradient_matches_finite_differences() {
        // The MLE objective is assembled inline; check it through its value
        // by probing the solver's stationarity instead: at an interior
        // optimum the gradient must be ~0.
        let mut rng = SplitMix64::new(14);
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.uniform(-0.5, 0.5)).collect())
            .collect();
        let history: Vec<(&[f64], u8)> =
            xs.iter().enumerate().map(|(i, x)| (x.as_slice(), (i % 2) as u8)).collect();
        let gamma = 0.8;
        let sol = solve_regularized_mle(3, &history, gamma, 10.0, 1e-9, 10_000).unwrap();
        // interior: far from the ball boundary
        assert!(norm2(&sol) < 9.0);
        for i in 0..3 {
            let h = 1e-6;
            let mut tp = sol.clone();
            let mut tm = sol.clone();
            tp[i] += h;
            tm[i] -= h;
            let f = |th: &[f64]| -> f64 {
                let mut v = gamma * dot(th, th);
                for (x, y) in &history {
                    v += xent_loss(dot(x, th), *y);
                }
                v
            };
            let fd = (f(&tp) - f(&tm)) / (2.0 * h);
            assert!(fd.abs() < 1e-6, "coord {i} grad {fd}");
        }
    }

    #[test]
    fn proximal_weight_range() {
        assert!(proximal_weight(0.0) == 0.5);
        let w = proximal_weight(3.0);
        assert!(w > 0.0 && w <= 0.5);
    }
}
