//! Logistic slate bandits with slot-decomposed confidence sets.
//!
//! A slate is one item per slot, concatenated into a single feature vector;
//! the environment returns one Bernoulli reward whose mean is a logistic
//! function of the slate's inner product with an unknown parameter. The
//! learners here avoid enumerating the combinatorial slate space: they keep
//! per-slot design matrices and pick each slot's item independently, which
//! is equivalent to the slate-level rule because both the linear score and
//! the exploration bonus decompose across slots.
//!
//! Module layout:
//! - [`rng`]: counter-free splittable PRNG so every run is reproducible
//!   bit-for-bit across platforms.
//! - [`linalg`]: small dense symmetric matrices, rank-one updated inverses,
//!   and a Jacobi eigensolver.
//! - [`glm`]: the logistic link, its derivatives, cross-entropy loss, and
//!   the scalar schedules used for bonuses and confidence radii.
//! - [`optim`]: projections onto ball/ellipsoid intersections and the
//!   projected-gradient solvers for the penalized logistic objectives.
//! - [`bandit`]: the learners (per-slot OFU and TS, a fixed-arm TS variant,
//!   slate-enumerating baselines, uniform random).
//! - [`env`]: synthetic slate environments and regret accounting.
//! - [`harness`]: experiment configs, CSV/JSON outputs, timing benches,
//!   diagnostics, and cross-seed aggregation.

pub mod bandit;
pub mod env;
pub mod glm;
pub mod harness;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod tol;

pub use bandit::{OnlineState, SelectionResult, Slate};
pub use env::{Instance, RoundRecord};
pub use glm::ScalarSchedule;
pub use linalg::{MaintainedPsd, SymMatrix};
pub use optim::AdmissibleSet;
pub use rng::SplitMix64;
