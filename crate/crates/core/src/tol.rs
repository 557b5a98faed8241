//! Central record of numeric tolerances and iteration limits.
//!
//! Every hard-coded epsilon in the crate lives here so that the numerics can
//! be audited (and tightened or loosened) in one place. Values are chosen for
//! well-conditioned small dense problems: dimensions stay below ~10^3 and all
//! maintained matrices are identity-plus-PSD.

/// Relative off-diagonal threshold at which the Jacobi sweep loop stops.
pub const JACOBI_REL_TOL: f64 = 1e-14;

/// Upper bound on Jacobi sweeps; exceeding it is reported as non-convergence.
pub const JACOBI_MAX_SWEEPS: usize = 64;

/// Acceptable drift of a maintained inverse, as Frobenius error of
/// `M * M^-1 - I` divided by the dimension.
pub const INVERSE_DRIFT_TOL: f64 = 1e-8;

/// Rank-one updates between full re-inversions of a maintained inverse.
pub const DEFAULT_REFRESH_EVERY: u32 = 256;

/// Multiplicative slack for set-membership checks (`||theta|| <= S*(1+slack)`).
pub const MEMBERSHIP_REL_SLACK: f64 = 1e-9;

/// Absolute feasibility violation allowed for solver outputs.
pub const SOLVER_MEMBERSHIP_TOL: f64 = 1e-6;

/// Armijo backtracking: step-halving factor and sufficient-decrease constant.
pub const ARMIJO_BETA: f64 = 0.5;
pub const ARMIJO_C: f64 = 1e-4;

/// Maximum backtracking halvings within a single gradient step.
pub const ARMIJO_MAX_HALVINGS: usize = 60;

/// Absolute slack added to the sufficient-decrease test, scaled by
/// `1 + |f(x)|`. Near an optimum the true per-step decrease falls below the
/// f64 quantization of the objective; without this slack the acceptance test
/// degenerates into ulp-level coin flips and the iterate stalls short of
/// tight precision targets.
pub const ARMIJO_F_SLACK: f64 = 1e-14;

/// Floor for solver precision targets (gradient-mapping norm).
pub const SOLVER_MIN_PRECISION: f64 = 1e-9;

/// Default iteration cap for projected gradient descent.
pub const SOLVER_MAX_ITER: usize = 10_000;

/// Constraint-residual tolerance for the ellipsoid projection root-find.
pub const ELLIPSOID_ROOT_TOL: f64 = 1e-12;

/// Iteration cap for the ellipsoid projection root-find.
pub const ELLIPSOID_ROOT_MAX_ITER: usize = 200;

/// Convergence tolerance and iteration cap for alternating projections.
pub const DYKSTRA_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_ITER: usize = 10_000;

/// Slack when deciding PSD sandwich margins (eigenvalues this close to zero
/// still count as nonnegative).
pub const SANDWICH_EIG_SLACK: f64 = 1e-10;

/// Default cap on posterior-sample rejections per round.
pub const REJECTION_CAP: usize = 10_000;
