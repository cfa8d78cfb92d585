//! Slow, independent reference solver for the per-step subproblem.
//!
//! This solves the same primal problem as the dual machinery in
//! [`crate::dual`], but from the primal side: accelerated proximal-gradient
//! iteration with backtracking line search and function-value restarts.  It
//! shares no code with the dual path beyond the scalar loss and prox
//! primitives, which makes it a useful cross-check; it is meant for tests
//! and diagnostics, never for the hot path of a learner.

use crate::error::{Error, Result};
use crate::losses::{loss_deriv, loss_value, LossKind};
use crate::penalties::Penalty;
use crate::dual::Subproblem;
use crate::types::Weights;

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub w: Weights,
    /// Stationarity measure at the returned point: the proximal-gradient
    /// mapping norm for the smooth losses, the margin mismatch for the
    /// hinge's boundary case.
    pub residual: f64,
    pub iterations: usize,
}

const MAX_ITERS: usize = 1_000_000;

/// Reference solution of an l1 subproblem.
pub fn prox_reference(sub: &Subproblem, tol: f64) -> Result<ReferenceSolution> {
    sub.check()?;
    prox_reference_penalty(
        sub.x,
        sub.y,
        sub.w_hat,
        sub.eta,
        sub.loss,
        Penalty::L1 { lambda: sub.lambda },
        tol,
    )
}

/// Reference solution of `min_w loss(<x, w>, y) + pen(w) + ||w - what||^2 / (2 eta)`
/// for an arbitrary penalty (the ridge acceptance checks use `Penalty::L2`).
pub fn prox_reference_penalty(
    x: &[f64],
    y: f64,
    w_hat: &[f64],
    eta: f64,
    loss: LossKind,
    pen: Penalty,
    tol: f64,
) -> Result<ReferenceSolution> {
    if x.len() != w_hat.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: w_hat.len() });
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    pen.validate()?;
    if loss == LossKind::Hinge {
        // proximal gradient needs a differentiable loss; the hinge has its
        // own exact branch-resolution solver
        return hinge_reference(x, y, w_hat, eta, pen);
    }
    if loss == LossKind::Squared {
        // with a quadratic (or absent) penalty the whole subproblem is a
        // linear system, solvable far beyond first-order accuracy
        let lambda2 = match pen {
            Penalty::None => Some(0.0),
            Penalty::L1 { lambda } if lambda == 0.0 => Some(0.0),
            Penalty::L2 { lambda } => Some(lambda),
            _ => None,
        };
        if let Some(lambda2) = lambda2 {
            return quadratic_reference(x, y, w_hat, eta, lambda2);
        }
    }
    let d = x.len();

    // smooth part: loss(<x, w>, y) + ||w - what||^2 / (2 eta)
    let smooth = |w: &[f64]| -> Result<f64> {
        let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
        let anchor: f64 =
            w.iter().zip(w_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * eta);
        Ok(loss_value(loss, z, y)? + anchor)
    };
    let smooth_grad = |w: &[f64], g: &mut Vec<f64>| -> Result<()> {
        let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
        let dphi = loss_deriv(loss, z, y)?;
        g.clear();
        g.extend(
            x.iter().zip(w).zip(w_hat).map(|((&xi, &wi), &hi)| dphi * xi + (wi - hi) / eta),
        );
        Ok(())
    };

    let mut w = w_hat.to_vec();
    let mut v = w.clone(); // extrapolated point
    let mut g = Vec::with_capacity(d);
    let mut momentum = 1.0f64;
    let step0 = eta.min(1.0);
    let mut step = step0;
    let mut obj_prev = smooth(&w)? + pen.value(&w);

    // Near the floating-point floor the iterates creep by single ulps and
    // the mapping residual stops shrinking; track the most stationary point
    // seen and return it once the residual has stagnated.  (The objective is
    // useless as a progress signal here: its improvements saturate at
    // ulp(f) while the residual still has orders of magnitude to fall.)
    let mut best_w = w.clone();
    let mut best_residual = f64::INFINITY;
    let mut stalled = 0usize;

    for it in 1..=MAX_ITERS {
        // let a transiently shrunk step recover (local curvature varies)
        step = (step * 1.5).min(step0);
        smooth_grad(&v, &mut g)?;
        let f_v = smooth(&v)?;
        // backtracking on the smooth part around v
        let mut w_new;
        loop {
            let cand: Vec<f64> = v.iter().zip(&g).map(|(&vi, &gi)| vi - step * gi).collect();
            w_new = pen.prox(&cand, step)?;
            let dv: f64 =
                w_new.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let lin: f64 =
                w_new.iter().zip(&v).zip(&g).map(|((a, b), gi)| (a - b) * gi).sum::<f64>();
            let bound = f_v + lin + dv / (2.0 * step);
            // the slack keeps rounding noise in two nearly-equal objective
            // values from shrinking the step spuriously near convergence
            let slack = 16.0 * f64::EPSILON * (1.0 + f_v.abs() + bound.abs());
            if smooth(&w_new)? <= bound + slack || dv == 0.0 {
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(Error::numeric("reference solver: step size underflow"));
            }
        }
        let residual: f64 = w_new
            .iter()
            .zip(&v)
            .map(|(a, b)| ((a - b) / step) * ((a - b) / step))
            .sum::<f64>()
            .sqrt();
        if residual <= tol || w_new == w {
            return Ok(ReferenceSolution {
                w: Weights::new(w_new)?,
                residual,
                iterations: it,
            });
        }
        let obj_new = smooth(&w_new)? + pen.value(&w_new);
        if residual < best_residual {
            best_residual = residual;
            best_w.clone_from(&w_new);
            stalled = 0;
        } else {
            stalled += 1;
            // generous window: the residual is non-monotone under momentum
            // and may only ratchet down once per restart cycle
            if stalled >= 1000 {
                // measure stationarity at the point actually returned
                smooth_grad(&best_w, &mut g)?;
                let cand: Vec<f64> =
                    best_w.iter().zip(&g).map(|(&wi, &gi)| wi - step * gi).collect();
                let mapped = pen.prox(&cand, step)?;
                let res = mapped
                    .iter()
                    .zip(&best_w)
                    .map(|(a, b)| ((a - b) / step) * ((a - b) / step))
                    .sum::<f64>()
                    .sqrt();
                return Ok(ReferenceSolution {
                    w: Weights::new(best_w)?,
                    residual: res.min(best_residual),
                    iterations: it,
                });
            }
        }
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if obj_new > obj_prev {
            // restart the momentum sequence when the objective backslides
            momentum = 1.0;
            v = w_new.clone();
        } else {
            let mix = (momentum - 1.0) / next_momentum;
            v = w_new.iter().zip(&w).map(|(a, b)| a + mix * (a - b)).collect();
            momentum = next_momentum;
        }
        obj_prev = obj_new;
        w = w_new;
    }
    Err(Error::numeric(format!("reference solver: no convergence in {MAX_ITERS} iterations")))
}

/// Exact solver for the all-quadratic case: squared loss plus an l2 (or no)
/// penalty.  The stationarity condition is the linear system
///
/// ```text
/// (x x' + c I) w = y x + w_hat / eta,    c = lambda2 + 1/eta,
/// ```
///
/// which conjugate gradients solve essentially exactly — the matrix has at
/// most two distinct eigenvalues (`c` and `c + ||x||^2`), so the Krylov
/// space closes after two steps and the remaining iterations only polish
/// rounding error.  A genuinely different route from the rank-one update
/// formula the production path uses, which is the point of a reference.
fn quadratic_reference(
    x: &[f64],
    y: f64,
    w_hat: &[f64],
    eta: f64,
    lambda2: f64,
) -> Result<ReferenceSolution> {
    let d = x.len();
    let c = lambda2 + 1.0 / eta;
    let matvec = |v: &[f64], out: &mut Vec<f64>| {
        let xv: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
        out.clear();
        out.extend(x.iter().zip(v).map(|(&xi, &vi)| xv * xi + c * vi));
    };
    let b: Vec<f64> = x.iter().zip(w_hat).map(|(&xi, &hi)| y * xi + hi / eta).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let b_scale = 1.0 + norm(&b);

    let mut w = vec![0.0; d];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = Vec::with_capacity(d);
    let mut rr: f64 = r.iter().map(|a| a * a).sum();
    let mut iterations = 0usize;
    for _ in 0..(d + 4).min(64) {
        if rr.sqrt() <= 1e-15 * b_scale {
            break;
        }
        matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::numeric("reference solver: quadratic system not positive"));
        }
        let alpha = rr / pap;
        for i in 0..d {
            w[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|a| a * a).sum();
        let beta = rr_new / rr;
        for i in 0..d {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }

    // report true stationarity, not the recursively updated residual
    matvec(&w, &mut ap);
    let residual = norm(&ap.iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<f64>>());
    Ok(ReferenceSolution { w: Weights::new(w)?, residual, iterations })
}

/// Exact hinge subproblem solver by case analysis.  Every KKT point has the
/// form `w(s) = prox_{eta pen}(what + eta s y x)` for an active-branch
/// weight `s in [0, 1]` (`s = 1` when the margin is violated, `s = 0` when
/// it holds strictly, interior `s` on the boundary `y <x, w> = 1`), and the
/// margin gap `h(s) = y <x, w(s)> - 1` is nondecreasing in `s`, so the
/// consistent case is found directly and the boundary case by bisection.
fn hinge_reference(
    x: &[f64],
    y: f64,
    w_hat: &[f64],
    eta: f64,
    pen: Penalty,
) -> Result<ReferenceSolution> {
    LossKind::Hinge.check_label(y)?;
    let shifted = |s: f64| -> Result<Vec<f64>> {
        let cand: Vec<f64> =
            w_hat.iter().zip(x).map(|(&wi, &xi)| wi + eta * s * y * xi).collect();
        pen.prox(&cand, eta)
    };
    let gap = |w: &[f64]| -> f64 { y * x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - 1.0 };

    let w1 = shifted(1.0)?;
    if gap(&w1) <= 0.0 {
        return Ok(ReferenceSolution { w: Weights::new(w1)?, residual: 0.0, iterations: 1 });
    }
    let w0 = shifted(0.0)?;
    if gap(&w0) >= 0.0 {
        return Ok(ReferenceSolution { w: Weights::new(w0)?, residual: 0.0, iterations: 2 });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut w = w0;
    let mut iterations = 2;
    // 60 halvings take the bracket to ~1e-18, ulp-tight in s
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        w = shifted(mid)?;
        iterations += 1;
        if gap(&w) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let residual = gap(&w).abs();
    Ok(ReferenceSolution { w: Weights::new(w)?, residual, iterations })
}
