//! Optimal signal-adaptive liquidation under linear temporary and
//! exponentially decaying transient price impact.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerics:
//!
//! * [`model`]: the 4×4 system matrix, its explicit eigen-decomposition,
//!   the fourth row of `exp(L τ)`, the `G` row and the feedback
//!   coefficients `v0..v3`, plus the well-posedness check on `v0`.
//! * [`signal`]: Ornstein–Uhlenbeck, deterministic and zero signals, path
//!   sampling and the conditional-expectation kernels used by the law.
//! * [`feedback`]: the optimal feedback rate, `ζ̂`, the closed-loop matrix
//!   `B(t)` and the fundamental-solution representation of `(X, Y)`.
//! * [`simulate`]: closed-loop Monte Carlo and cost evaluation.
//! * [`oracle`]: a discretised brute-force solver of the same cost
//!   functional plus Gâteaux and forward-backward residual checks.
//! * [`verify`]: the invariant suite behind `liquidation verify`.
//!
//! File formats, configuration and the command line live in the companion
//! `liquidation` crate.

#![cfg_attr(not(test), no_std)]
// NaN-rejecting guards are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod error;
pub mod feedback;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod signal;
pub mod simulate;
pub mod verify;

mod stats;

pub use error::{Error, Result};
pub use feedback::{
    reference_strategies, FeedbackLaw, FundamentalSolution, LawSchedule, ReferenceLaws,
    DEFAULT_KAPPA_SMALL,
};
pub use model::{Coefficients, EigenSystem, CoefficientSet, Gap, ScaledRow, SweepReport, DEFAULT_GAP_FLOOR};
pub use oracle::{DiscreteProblem, FbsdeReport, OracleSolution};
pub use params::{ModelParams, TimeGrid};
pub use signal::{DeterministicRate, Observation, OuSignalParams, Predictor, SignalModel, SignalPath};
pub use simulate::{CostBreakdown, CostWeights, Estimate, McSummary, Policy, Trajectory};
pub use stats::pairwise_sum;
