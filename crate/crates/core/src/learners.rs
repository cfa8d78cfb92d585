//! Online learners sharing one step interface: the fully implicit update and
//! the explicit/semi-implicit baselines it is compared against.
//!
//! All learners start from the zero vector, observe one example per step,
//! pay the regularized loss `f_t(w_t) + r(w_t)` *before* updating, and then
//! move to `w_{t+1}`:
//!
//! * `sgd` — subgradient step on loss and penalty together.
//! * `comid` — subgradient step on the loss, then the penalty prox
//!   (composite mirror descent with the Euclidean mirror).
//! * `isgd` — explicit subgradient step on the penalty, then the exact
//!   prox of the loss alone from that shifted anchor.
//! * `pa` — exact prox of the loss alone from the current iterate; the
//!   penalty is reported in the instantaneous loss but never enters the
//!   update (passive-aggressive style).
//! * `fiol` — exact prox of loss *and* penalty jointly, solved through the
//!   one-dimensional dual (see [`crate::dual`]).
//!
//! A step whose iterate stops being representable in `f64` latches the
//! learner into a diverged state: the finite pre-blowup iterate is kept, the
//! step reports [`Error::Diverged`], and so does every later call.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dual::{
    recover_primal, ridge_closed_form, solve_bisection, solve_partition, solve_sort, SolverKind,
    Subproblem,
};
use crate::error::{Error, Result};
use crate::evaluation::{linearization_gap, sparsity_count, RunRecord, StepRow};
use crate::losses::{loss_deriv, loss_value, LossKind};
use crate::penalties::Penalty;
use crate::types::{dot, Example, StepSchedule, Weights};

/// Dual-root tolerance used when a learner runs the bisection solver.
pub const DEFAULT_BISECTION_EPS: f64 = 1e-10;

/// Update rule identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Sgd,
    Comid,
    Isgd,
    Pa,
    Fiol,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Sgd, Algo::Comid, Algo::Isgd, Algo::Pa, Algo::Fiol];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Sgd => "sgd",
            Algo::Comid => "comid",
            Algo::Isgd => "isgd",
            Algo::Pa => "pa",
            Algo::Fiol => "fiol",
        }
    }

    /// Whether the update involves an exact one-dimensional prox solve.
    pub fn uses_dual_solver(self) -> bool {
        matches!(self, Algo::Isgd | Algo::Pa | Algo::Fiol)
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Algo::Sgd),
            "comid" => Ok(Algo::Comid),
            "isgd" => Ok(Algo::Isgd),
            "pa" => Ok(Algo::Pa),
            "fiol" => Ok(Algo::Fiol),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Everything needed to instantiate a learner.
#[derive(Debug, Clone)]
pub struct LearnerConfig {
    pub algo: Algo,
    pub loss: LossKind,
    pub penalty: Penalty,
    pub schedule: StepSchedule,
    /// Solver for the exact prox; ignored by `sgd` and `comid`.
    pub solver: SolverKind,
    /// Seed for the partition solver's pivot choices.
    pub seed: u64,
}

impl LearnerConfig {
    /// Checks internal consistency.  The closed-form solver exists only for
    /// the squared loss, and — since it never produces soft-thresholding —
    /// `fiol` may pair it with an l1 penalty only at weight zero.
    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        self.schedule.validate()?;
        if self.solver == SolverKind::ClosedForm && self.algo.uses_dual_solver() {
            if self.loss != LossKind::Squared {
                return Err(Error::invalid(format!(
                    "closed-form solver requires the squared loss, got {}",
                    self.loss
                )));
            }
            if self.algo == Algo::Fiol {
                if let Penalty::L1 { lambda } = self.penalty {
                    if lambda > 0.0 {
                        return Err(Error::invalid(
                            "closed-form solver cannot handle fiol with an active l1 penalty; \
                             use sort, partition, or bisection",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Telemetry of one completed step.  `t` is the index of the example just
/// consumed (1-based); `inst_loss` was paid at the pre-update iterate and
/// `nonzeros` counts the post-update one.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub t: u64,
    pub eta: f64,
    pub inst_loss: f64,
    /// Improvement of the implicit step over its linearization; 0 for the
    /// explicit baselines.
    pub delta_t: f64,
    /// Dual root of the prox solve, when the update performed one.
    pub beta: Option<f64>,
    pub nonzeros: usize,
    pub elapsed_ns: u64,
}

impl StepStats {
    pub fn row(&self) -> StepRow {
        StepRow {
            t: self.t,
            eta: self.eta,
            inst_loss: self.inst_loss,
            delta_t: self.delta_t,
            nonzeros: self.nonzeros,
            elapsed_ns: self.elapsed_ns,
        }
    }
}

/// Online learner state: current iterate plus the bookkeeping one step needs.
#[derive(Debug, Clone)]
pub struct Learner {
    cfg: LearnerConfig,
    w: Vec<f64>,
    /// Index of the next example, starting at 1.
    t: u64,
    rng: ChaCha12Rng,
    diverged: Option<u64>,
    /// Scratch for densifying sparse features.
    x_buf: Vec<f64>,
}

impl Learner {
    /// Fresh learner at the zero vector in dimension `d`.
    pub fn new(cfg: LearnerConfig, d: usize) -> Result<Self> {
        Self::with_initial(cfg, Weights::zeros(d))
    }

    /// Learner starting from a caller-supplied iterate.
    pub fn with_initial(cfg: LearnerConfig, w0: Weights) -> Result<Self> {
        cfg.validate()?;
        if w0.is_empty() {
            return Err(Error::invalid("learner dimension must be at least 1"));
        }
        let rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        let d = w0.len();
        Ok(Learner { cfg, w: w0.into_vec(), t: 1, rng, diverged: None, x_buf: vec![0.0; d] })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Index of the next example this learner would consume.
    pub fn next_step(&self) -> u64 {
        self.t
    }

    /// Step at which the iterate blew up, if it did.
    pub fn diverged_at(&self) -> Option<u64> {
        self.diverged
    }

    /// Consumes one example: pays the instantaneous loss at the current
    /// iterate, updates, and reports the step telemetry.
    ///
    /// A non-finite prediction or post-update iterate — including a prox
    /// solve whose exact answer overflows `f64` — latches divergence and
    /// returns [`Error::Diverged`]; the last finite iterate is retained and
    /// all subsequent calls fail the same way.
    pub fn step(&mut self, ex: &Example) -> Result<StepStats> {
        if let Some(step) = self.diverged {
            return Err(Error::Diverged { step });
        }
        if ex.dim() != self.w.len() {
            return Err(Error::DimensionMismatch { expected: self.w.len(), got: ex.dim() });
        }
        self.cfg.loss.check_label(ex.label)?;
        let t = self.t;
        let eta = self.cfg.schedule.eta_at(t)?;
        let start = Instant::now();

        let z = dot(&ex.features, &self.w)?;
        if !z.is_finite() {
            return self.latch(t);
        }
        let inst_loss = loss_value(self.cfg.loss, z, ex.label)? + self.cfg.penalty.value(&self.w);

        let (w_next, beta) = match self.update(ex, z, eta) {
            Ok(pair) => pair,
            // an exactly-computed update that cannot be represented is a
            // property of the run, not a usage error
            Err(Error::Numeric(_)) => return self.latch(t),
            Err(e) => return Err(e),
        };
        if w_next.iter().any(|v| !v.is_finite()) {
            return self.latch(t);
        }
        let delta_t = if self.cfg.algo == Algo::Fiol {
            linearization_gap(self.cfg.loss, self.cfg.penalty, &self.w, &w_next, ex)?
        } else {
            0.0
        };
        if !delta_t.is_finite() {
            // only reachable when the loss itself overflowed along the way
            return self.latch(t);
        }

        let nonzeros = w_next.len() - sparsity_count(&w_next);
        self.w = w_next;
        self.t += 1;
        Ok(StepStats {
            t,
            eta,
            inst_loss,
            delta_t,
            beta,
            nonzeros,
            elapsed_ns: start.elapsed().as_nanos() as u64,
        })
    }

    /// Runs the learner over a stream, collecting per-step telemetry.
    /// Divergence ends the run and is recorded rather than returned as an
    /// error; any other failure propagates.
    pub fn run<I>(&mut self, stream: I) -> Result<RunRecord>
    where
        I: IntoIterator<Item = Example>,
    {
        let mut rows = Vec::new();
        for ex in stream {
            match self.step(&ex) {
                Ok(stats) => rows.push(stats.row()),
                Err(Error::Diverged { .. }) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(RunRecord { rows, final_w: Weights::new(self.w.clone())?, diverged: self.diverged })
    }

    fn latch(&mut self, t: u64) -> Result<StepStats> {
        self.diverged = Some(t);
        Err(Error::Diverged { step: t })
    }

    /// The per-algorithm move from the current iterate; returns the next
    /// iterate and, for prox-solving updates, the dual root.
    fn update(&mut self, ex: &Example, z: f64, eta: f64) -> Result<(Vec<f64>, Option<f64>)> {
        let loss = self.cfg.loss;
        let pen = self.cfg.penalty;
        let y = ex.label;
        ex.features.write_dense(&mut self.x_buf)?;
        match self.cfg.algo {
            Algo::Sgd => {
                let dphi = loss_deriv(loss, z, y)?;
                let g = pen.subgrad(&self.w);
                let w = self
                    .w
                    .iter()
                    .zip(&self.x_buf)
                    .zip(&g)
                    .map(|((&wi, &xi), &gi)| wi - eta * (dphi * xi + gi))
                    .collect();
                Ok((w, None))
            }
            Algo::Comid => {
                let dphi = loss_deriv(loss, z, y)?;
                let cand: Vec<f64> = self
                    .w
                    .iter()
                    .zip(&self.x_buf)
                    .map(|(&wi, &xi)| wi - eta * dphi * xi)
                    .collect();
                Ok((pen.prox(&cand, eta)?, None))
            }
            Algo::Isgd => {
                let g = pen.subgrad(&self.w);
                let anchor: Vec<f64> =
                    self.w.iter().zip(&g).map(|(&wi, &gi)| wi - eta * gi).collect();
                let (w, beta) = implicit_argmin(
                    self.cfg.solver,
                    &mut self.rng,
                    loss,
                    &self.x_buf,
                    y,
                    &anchor,
                    eta,
                    0.0,
                )?;
                Ok((w.into_vec(), Some(beta)))
            }
            Algo::Pa => {
                let (w, beta) = implicit_argmin(
                    self.cfg.solver,
                    &mut self.rng,
                    loss,
                    &self.x_buf,
                    y,
                    &self.w,
                    eta,
                    0.0,
                )?;
                Ok((w.into_vec(), Some(beta)))
            }
            Algo::Fiol => match pen {
                Penalty::None => {
                    let (w, beta) = implicit_argmin(
                        self.cfg.solver,
                        &mut self.rng,
                        loss,
                        &self.x_buf,
                        y,
                        &self.w,
                        eta,
                        0.0,
                    )?;
                    Ok((w.into_vec(), Some(beta)))
                }
                Penalty::L1 { lambda } => {
                    let (w, beta) = implicit_argmin(
                        self.cfg.solver,
                        &mut self.rng,
                        loss,
                        &self.x_buf,
                        y,
                        &self.w,
                        eta,
                        lambda,
                    )?;
                    Ok((w.into_vec(), Some(beta)))
                }
                Penalty::L2 { lambda } => {
                    if self.cfg.solver == SolverKind::ClosedForm {
                        let w = ridge_closed_form(&self.x_buf, y, &self.w, eta, lambda)?;
                        let zt: f64 =
                            w.as_slice().iter().zip(&self.x_buf).map(|(a, b)| a * b).sum();
                        return Ok((w.into_vec(), Some(y - zt)));
                    }
                    // fold the quadratic penalty into the proximity term:
                    // the minimizer equals the penalty-free prox from the
                    // shrunk anchor what/s at step eta/s, s = 1 + lambda eta
                    let s = 1.0 + lambda * eta;
                    let anchor: Vec<f64> = self.w.iter().map(|&wi| wi / s).collect();
                    let (w, beta) = implicit_argmin(
                        self.cfg.solver,
                        &mut self.rng,
                        loss,
                        &self.x_buf,
                        y,
                        &anchor,
                        eta / s,
                        0.0,
                    )?;
                    Ok((w.into_vec(), Some(beta)))
                }
            },
        }
    }
}

/// Exact minimizer of `phi(<x, w>) + lambda1 ||w||_1 + ||w - what||^2 / (2 eta)`
/// via the configured solver, plus the dual root it came from.
fn implicit_argmin<R: Rng + ?Sized>(
    solver: SolverKind,
    rng: &mut R,
    loss: LossKind,
    x: &[f64],
    y: f64,
    w_hat: &[f64],
    eta: f64,
    lambda1: f64,
) -> Result<(Weights, f64)> {
    if solver == SolverKind::ClosedForm {
        debug_assert!(loss == LossKind::Squared && lambda1 == 0.0);
        let w = ridge_closed_form(x, y, w_hat, eta, 0.0)?;
        let zt: f64 = w.as_slice().iter().zip(x).map(|(a, b)| a * b).sum();
        return Ok((w, y - zt));
    }
    let sub = Subproblem::new(x, w_hat, eta, lambda1, loss, y)?;
    let sol = match solver {
        SolverKind::Bisection => solve_bisection(&sub, DEFAULT_BISECTION_EPS)?,
        SolverKind::Sort => solve_sort(&sub)?,
        SolverKind::Partition => solve_partition(&sub, rng)?,
        SolverKind::ClosedForm => unreachable!("handled above"),
    };
    Ok((recover_primal(&sub, sol.beta), sol.beta))
}
