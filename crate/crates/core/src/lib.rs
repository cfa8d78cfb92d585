//! Fully implicit online learning.
//!
//! Each step of an online convex learner with loss `f_t(w) = phi(<x_t, w>)`
//! and penalty `r` can be taken *implicitly*: instead of stepping along a
//! gradient, solve the proximal subproblem
//!
//! ```text
//! w_{t+1} = argmin_w  phi(<x_t, w>) + r(w) + ||w - w_t||^2 / (2 eta_t)
//! ```
//!
//! exactly.  Because the loss touches `w` only through one inner product,
//! this d-dimensional problem collapses to a one-dimensional dual root-find
//! whose derivative is piecewise linear in the dual variable; [`dual`]
//! exploits that with three interchangeable exact solvers (sorting the
//! breakpoints, partitioning them in expected linear time, or plain
//! bisection) plus a closed form for the ridge case.
//!
//! Around that core sit the pieces an experiment needs:
//!
//! * [`losses`] / [`penalties`] — the scalar losses (squared, hinge,
//!   logistic, exponential), their conjugate machinery, and the l1/l2
//!   penalties with their prox operators.
//! * [`learners`] — the implicit learner and the explicit baselines (`sgd`,
//!   `comid`, `isgd`, `pa`) behind one step interface.
//! * [`evaluation`] — per-step telemetry, regret against a batch
//!   comparator, progressive objectives, sparsity counts.
//! * [`datastream`] — a reproducible correlated synthetic stream and a
//!   sparse text reader.
//! * [`reference`] — a slow independent proximal solver used to cross-check
//!   the dual path in tests.
//!
//! Everything is deterministic given the configured seeds; the only
//! randomness is the partition solver's pivot choice and the synthetic
//! stream, both driven by explicitly seeded ChaCha12 generators.

pub mod datastream;
pub mod dual;
pub mod error;
pub mod evaluation;
pub mod learners;
pub mod losses;
pub mod penalties;
pub mod reference;
pub mod types;

pub use datastream::{read_sparse_text, true_weights, SyntheticConfig, SyntheticStream};
pub use dual::{
    build_breakpoints, recover_primal, response_direct, response_from_breakpoints,
    ridge_closed_form, solve_bisection, solve_partition, solve_sort, BreakpointSet, DualSolution,
    SolverKind, Subproblem,
};
pub use error::{Error, Result};
pub use evaluation::{
    batch_comparator, linearization_gap, progressive_objective, regret, sparsity_count,
    ComparatorResult, RegretReport, RunRecord, StepRow,
};
pub use learners::{Algo, Learner, LearnerConfig, StepStats, DEFAULT_BISECTION_EPS};
pub use losses::{
    conj_deriv, conj_value, dual_domain, loss_deriv, loss_value, solve_segment, DualDomain,
    LossKind,
};
pub use penalties::Penalty;
pub use reference::{prox_reference, prox_reference_penalty, ReferenceSolution};
pub use types::{
    dot, soft_threshold, soft_threshold_scalar, Example, Features, StepSchedule, Weights,
};
