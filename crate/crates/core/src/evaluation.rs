//! Run telemetry and offline evaluation: per-step records, the batch
//! comparator, regret, progressive objective, and sparsity accounting.

use crate::error::{Error, Result};
use crate::losses::{loss_deriv, loss_value, LossKind};
use crate::penalties::Penalty;
use crate::types::{dot, Example, Weights};

/// One row of per-step telemetry, in the layout of the steps CSV.
#[derive(Debug, Clone, Copy)]
pub struct StepRow {
    pub t: u64,
    pub eta: f64,
    /// Regularized loss at the pre-update iterate, `f_t(w_t) + r(w_t)`.
    pub inst_loss: f64,
    /// One-step improvement of the implicit update over its linearization
    /// (0 for the explicit baselines).
    pub delta_t: f64,
    /// Nonzero count of the post-update iterate.
    pub nonzeros: usize,
    pub elapsed_ns: u64,
}

/// Telemetry of one completed (or diverged) run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<StepRow>,
    pub final_w: Weights,
    /// Step at which a non-finite iterate was detected, if any.  Rows cover
    /// the steps completed before that point.
    pub diverged: Option<u64>,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.rows.len()
    }

    pub fn sum_delta(&self) -> f64 {
        self.rows.iter().map(|r| r.delta_t).sum()
    }
}

/// The improvement a step gains over the linearized model at the pre-update
/// iterate:
///
/// ```text
/// [f_t(w') + r(w')] - [f_t(w) + r(w) + <f_t'(w) + r'(w), w' - w>]
/// ```
///
/// Convexity makes this nonnegative for any pair of points, and it vanishes
/// when the loss and the penalty are both linear between `w` and `w'`.
pub fn linearization_gap(
    loss: LossKind,
    pen: Penalty,
    before: &[f64],
    after: &[f64],
    ex: &Example,
) -> Result<f64> {
    if before.len() != after.len() {
        return Err(Error::DimensionMismatch { expected: before.len(), got: after.len() });
    }
    let z0 = dot(&ex.features, before)?;
    let z1 = dot(&ex.features, after)?;
    let dphi = loss_deriv(loss, z0, ex.label)?;
    let pen_grad = pen.subgrad(before);
    let new_val = loss_value(loss, z1, ex.label)? + pen.value(after);
    let old_val = loss_value(loss, z0, ex.label)? + pen.value(before);
    // <f'(w), w' - w> = dphi * (z1 - z0) since f touches w only through z
    let lin: f64 = dphi * (z1 - z0)
        + pen_grad.iter().zip(after.iter().zip(before)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
    Ok(new_val - (old_val + lin))
}

/// Number of exactly-zero entries (bit-exact; `1e-300` is nonzero).
pub fn sparsity_count(w: &[f64]) -> usize {
    w.iter().filter(|v| **v == 0.0).count()
}

/// Mean regularized loss along the run, `(1/N) sum_t [f_t(w_t) + r(w_t)]`.
pub fn progressive_objective(record: &RunRecord) -> Result<f64> {
    if record.rows.is_empty() {
        return Err(Error::invalid("progressive objective of an empty run"));
    }
    Ok(record.rows.iter().map(|r| r.inst_loss).sum::<f64>() / record.rows.len() as f64)
}

/// Offline minimizer used as the regret comparator.
#[derive(Debug, Clone)]
pub struct ComparatorResult {
    pub w: Weights,
    /// Proximal-gradient mapping norm at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// False when `max_iters` ran out before `tol` was reached; the best
    /// iterate is still returned.
    pub converged: bool,
}

/// Minimizes the batch objective `(1/N) sum_t f_t(w) + r(w)` over the
/// realized stream by proximal gradient with backtracking, from `w = 0`,
/// until the proximal-gradient residual drops to `tol` (or the iteration
/// budget runs out, in which case the result is flagged).
pub fn batch_comparator(
    examples: &[Example],
    loss: LossKind,
    pen: Penalty,
    tol: f64,
    max_iters: usize,
) -> Result<ComparatorResult> {
    if examples.is_empty() {
        return Err(Error::invalid("batch comparator needs a nonempty dataset"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    pen.validate()?;
    let d = examples[0].dim();
    for (i, ex) in examples.iter().enumerate() {
        if ex.dim() != d {
            return Err(Error::invalid(format!(
                "example {i} has dimension {} but the dataset started with {d}",
                ex.dim()
            )));
        }
    }

    let mut w = vec![0.0; d];
    let mut step = 1.0f64;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let (value, grad) = batch_smooth(examples, loss, &w)?;
        // let the step recover from transient curvature spikes
        let (w_new, r, s) = backtracked_step(examples, loss, pen, &w, value, &grad, (step * 1.5).min(1.0))?;
        step = s;
        residual = r;
        let fixpoint = w_new == w;
        w = w_new;
        if residual <= tol || fixpoint {
            return Ok(ComparatorResult {
                w: Weights::new(w)?,
                residual,
                iterations: it,
                converged: residual <= tol,
            });
        }
    }
    Ok(ComparatorResult { w: Weights::new(w)?, residual, iterations: max_iters, converged: false })
}

/// Mean smooth loss and its gradient over the dataset.
fn batch_smooth(examples: &[Example], loss: LossKind, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = examples.len() as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; w.len()];
    for ex in examples {
        let z = dot(&ex.features, w)?;
        value += loss_value(loss, z, ex.label)?;
        let dphi = loss_deriv(loss, z, ex.label)? / n;
        match &ex.features {
            crate::types::Features::Dense(x) => {
                for (gi, xi) in grad.iter_mut().zip(x) {
                    *gi += dphi * xi;
                }
            }
            crate::types::Features::Sparse { pairs, .. } => {
                for &(i, v) in pairs {
                    grad[i] += dphi * v;
                }
            }
        }
    }
    Ok((value / n, grad))
}

/// One backtracked proximal-gradient step; returns the new point, the
/// mapping residual, and the accepted step size.
fn backtracked_step(
    examples: &[Example],
    loss: LossKind,
    pen: Penalty,
    w: &[f64],
    value: f64,
    grad: &[f64],
    mut step: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    loop {
        let cand: Vec<f64> = w.iter().zip(grad).map(|(&wi, &gi)| wi - step * gi).collect();
        let w_new = pen.prox(&cand, step)?;
        let dv: f64 = w_new.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum();
        let lin: f64 = w_new.iter().zip(w).zip(grad).map(|((a, b), g)| (a - b) * g).sum();
        let (new_value, _) = batch_smooth(examples, loss, &w_new)?;
        let bound = value + lin + dv / (2.0 * step);
        // eps-scale slack so rounding noise between two nearly-equal
        // objective values cannot shrink the step spuriously
        let slack = 16.0 * f64::EPSILON * (1.0 + value.abs() + bound.abs());
        if new_value <= bound + slack || dv == 0.0 {
            let residual = (dv.sqrt()) / step;
            return Ok((w_new, residual, step));
        }
        step *= 0.5;
        if step < 1e-300 {
            return Err(Error::numeric("comparator: backtracking step underflow"));
        }
    }
}

/// Regret report for one run against a fixed comparator point.
#[derive(Debug, Clone)]
pub struct RegretReport {
    /// `sum_t [f_t(w_t) + r(w_t)] - sum_t [f_t(w*) + r(w*)]`; `inf` for
    /// diverged runs.
    pub regret: f64,
    /// Partial regret sampled at powers of two (and at the final step).
    pub per_t_curve: Vec<(u64, f64)>,
    /// Cumulative regularized loss of the comparator over the stream.
    pub comparator_objective: f64,
    /// Stationarity of the supplied comparator point on the batch objective.
    pub comparator_residual: f64,
}

/// Computes regret of a recorded run against `w_star` on the same stream.
/// The record and the dataset must have the same length and ordering.
pub fn regret(
    record: &RunRecord,
    examples: &[Example],
    w_star: &Weights,
    loss: LossKind,
    pen: Penalty,
) -> Result<RegretReport> {
    if record.rows.len() != examples.len() {
        return Err(Error::invalid(format!(
            "record has {} rows but the dataset has {} examples",
            record.rows.len(),
            examples.len()
        )));
    }
    if examples.is_empty() {
        return Err(Error::invalid("regret of an empty run"));
    }
    let ws = w_star.as_slice();
    let pen_star = pen.value(ws);
    let mut cum_algo = 0.0;
    let mut cum_star = 0.0;
    let mut curve = Vec::new();
    for (i, (row, ex)) in record.rows.iter().zip(examples).enumerate() {
        cum_algo += row.inst_loss;
        cum_star += loss_value(loss, dot(&ex.features, ws)?, ex.label)? + pen_star;
        let t = (i + 1) as u64;
        if t.is_power_of_two() || i + 1 == record.rows.len() {
            curve.push((t, cum_algo - cum_star));
        }
    }
    let regret = if record.diverged.is_some() { f64::INFINITY } else { cum_algo - cum_star };
    // stationarity of w* itself, via one backtracked step
    let (value, grad) = batch_smooth(examples, loss, ws)?;
    let (_, comparator_residual, _) = backtracked_step(examples, loss, pen, ws, value, &grad, 1.0)?;
    Ok(RegretReport { regret, per_t_curve: curve, comparator_objective: cum_star, comparator_residual })
}
