//! The shared per-round estimator update.
//!
//! Each round solves up to three small proximal problems anchored at the
//! current estimate: one with both labels attached to the played slate
//! (the curvature probe), and one per actual label value. The curvature
//! check compares the slope of the link at the probe solution against the
//! slopes at the two labeled solutions; when the probe is at most twice as
//! steep, the labeled solution for the observed reward becomes the next
//! estimate and the design matrices absorb the slate. Otherwise the round
//! is banked: the slate joins the warm-up history, a regularized MLE over
//! that history re-centers the confidence ellipsoid, and the estimate and
//! design matrices are left untouched.
//!
//! The labeled problem for the observed reward is exactly the problem the
//! next-estimate definition asks for, so its solution is reused rather than
//! re-solved — three solves per round, never four, with bit-identical
//! results.

use super::{BanditError, OnlineState, Slate};
use crate::glm::dmu;
use crate::linalg::SymMatrix;
use crate::optim::{
    proximal_weight, solve_penalized, solve_regularized_mle, AdmissibleSet, DataTerm, LabelMode,
    PenalizedObjective,
};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The three proximal solutions computed by the curvature check.
#[derive(Debug, Clone)]
pub struct CheckSolutions {
    /// Both-label probe solution.
    pub theta_bar: Vec<f64>,
    /// Label-0 solution.
    pub theta_zero: Vec<f64>,
    /// Label-1 solution.
    pub theta_one: Vec<f64>,
}

impl CheckSolutions {
    pub fn for_label(&self, y: u8) -> &[f64] {
        if y == 1 {
            &self.theta_one
        } else {
            &self.theta_zero
        }
    }
}

/// Which branch of the update the round takes, carrying the solutions either
/// way so the caller never re-solves.
#[derive(Debug, Clone)]
pub enum AdaptivityOutcome {
    Pass(CheckSolutions),
    Fail(CheckSolutions),
}

pub(crate) fn solve_step(
    state: &OnlineState,
    slate_flat: &[f64],
    mode: LabelMode,
) -> Result<Vec<f64>, BanditError> {
    let eta_weight = proximal_weight(state.admissible.diameter());
    let obj = PenalizedObjective::new(
        state.theta.clone(),
        state.w.matrix().clone(),
        eta_weight,
        vec![DataTerm { x: slate_flat.to_vec(), mode }],
    )?;
    Ok(solve_penalized(&obj, &state.admissible, state.precision(), state.params.solver_max_iter)?)
}

/// Solve the three proximal problems and apply the curvature criterion:
/// pass iff `dmu(<x, theta_bar>) <= 2 * min(dmu(<x, theta_0>), dmu(<x, theta_1>))`.
pub fn adaptivity_check(state: &OnlineState, slate: &Slate) -> Result<AdaptivityOutcome, BanditError> {
    let flat = slate.flat();
    if flat.len() != state.flat_dim() {
        return Err(BanditError::DimensionMismatch { expected: state.flat_dim(), got: flat.len() });
    }
    let theta_bar = solve_step(state, flat, LabelMode::Both)?;
    let theta_zero = solve_step(state, flat, LabelMode::Zero)?;
    let theta_one = solve_step(state, flat, LabelMode::One)?;
    let probe = dmu(dot(flat, &theta_bar));
    let lo = dmu(dot(flat, &theta_zero)).min(dmu(dot(flat, &theta_one)));
    let sols = CheckSolutions { theta_bar, theta_zero, theta_one };
    if probe <= 2.0 * lo {
        Ok(AdaptivityOutcome::Pass(sols))
    } else {
        Ok(AdaptivityOutcome::Fail(sols))
    }
}

/// Pass branch: adopt the labeled solution for the observed reward and add
/// the slate to the design matrices with weight `dmu(<x, theta_next>)`.
pub fn online_update(
    state: &mut OnlineState,
    slate: &Slate,
    y: u8,
    sols: &CheckSolutions,
) -> Result<(), BanditError> {
    debug_assert!(y <= 1);
    let theta_next = sols.for_label(y).to_vec();
    let flat = slate.flat();
    let weight = dmu(dot(flat, &theta_next));
    state.w.rank1_update(flat, weight)?;
    let d = state.dim();
    for (i, ws) in state.w_slots.iter_mut().enumerate() {
        ws.rank1_update(&flat[i * d..(i + 1) * d], weight)?;
    }
    state.theta = theta_next;
    state.t += 1;
    Ok(())
}

/// Fail branch: bank the round into the warm-up history, re-fit the history
/// MLE, rebuild the confidence ellipsoid, and freeze the online estimate and
/// design matrices.
pub fn warmup_update(state: &mut OnlineState, slate: &Slate, y: u8) -> Result<(), BanditError> {
    debug_assert!(y <= 1);
    state.history.push((slate.clone(), y));
    let nd = state.flat_dim();
    let gamma = state.params.schedule.gamma(state.t);
    let beta = state.params.schedule.beta(state.t);

    let rows: Vec<(&[f64], u8)> =
        state.history.iter().map(|(s, y)| (s.flat(), *y)).collect();
    let theta_h = solve_regularized_mle(
        nd,
        &rows,
        gamma,
        state.params.s,
        state.precision(),
        state.params.solver_max_iter,
    )?;

    // Confidence metric: gamma * I + kappa^{-1} * sum of slate outer products
    // over the updated history.
    let mut v_h = SymMatrix::scaled_identity(nd, gamma);
    let inv_kappa = 1.0 / state.params.kappa;
    for (s, _) in &state.history {
        v_h.add_scaled_outer(s.flat(), inv_kappa)?;
    }

    let set = AdmissibleSet::with_ellipsoid(state.params.s, theta_h.clone(), v_h, beta)?;
    // Keep the estimate admissible under the shrunken set.
    if !set.membership(&state.theta) {
        state.theta = set.project(&state.theta, crate::tol::DYKSTRA_TOL)?;
    }
    state.theta_h = Some(theta_h);
    state.admissible = set;
    state.t += 1;
    Ok(())
}
