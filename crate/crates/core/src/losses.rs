//! Scalar losses and their convex conjugates.
//!
//! Every loss here is a convex function of the prediction `z = <x, w>` with
//! label `y`:
//!
//! ```text
//! squared      0.5 * (y - z)^2          y real
//! hinge        max(1 - y z, 0)          y in {-1, +1}
//! logistic     ln(1 + exp(-y z))        y in {-1, +1}
//! exponential  exp(-y z)                y in {-1, +1}
//! ```
//!
//! The dual reduction works with `phi*(-beta)`, the conjugate evaluated at a
//! negated dual variable.  Its derivative in `beta` and the interval on which
//! the conjugate is finite are (for y = +1):
//!
//! ```text
//! squared      beta - y                     on (-inf, inf)
//! hinge        -1                           on [0, 1]
//! logistic     ln(beta / (1 - beta))        on (0, 1)   (open: the
//!                                           derivative diverges at 0 and 1)
//! exponential  ln(beta)                     on [0, inf) (diverges at 0)
//! ```
//!
//! For y = -1 the picture is mirrored through the origin:
//! `d/dbeta phi*(-beta) at (beta, -1) = -(the y = +1 value at -beta)`, and
//! the domain flips sign.  The general-label formulas below are written in
//! terms of `t = beta * y` so both labels share one code path.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Squared,
    Hinge,
    Logistic,
    Exponential,
}

impl LossKind {
    pub const ALL: [LossKind; 4] =
        [LossKind::Squared, LossKind::Hinge, LossKind::Logistic, LossKind::Exponential];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
            LossKind::Exponential => "exponential",
        }
    }

    /// Curvature modulus of the scalar loss in `z` (1 for squared, 0 for the
    /// piecewise-linear/flat-tailed classification losses).
    pub fn gamma(self) -> f64 {
        match self {
            LossKind::Squared => 1.0,
            _ => 0.0,
        }
    }

    pub fn is_classification(self) -> bool {
        !matches!(self, LossKind::Squared)
    }

    /// Rejects labels outside {-1, 1} for the classification losses and
    /// non-finite labels everywhere.
    pub fn check_label(self, y: f64) -> Result<()> {
        if self.is_classification() && y != 1.0 && y != -1.0 {
            return Err(Error::InvalidLabel { loss: self.name(), label: y });
        }
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite label {y}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(LossKind::Squared),
            "hinge" => Ok(LossKind::Hinge),
            "logistic" => Ok(LossKind::Logistic),
            "exponential" => Ok(LossKind::Exponential),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }
}

/// ln(1 + exp(u)) without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 33.0 {
        u
    } else if u < -37.0 {
        u.exp()
    } else {
        u.exp().ln_1p()
    }
}

/// Loss value at prediction `z` with label `y`.  May legitimately return
/// `inf` for the exponential loss on extreme predictions; callers treat that
/// as a divergence signal, not an error.
pub fn loss_value(kind: LossKind, z: f64, y: f64) -> Result<f64> {
    kind.check_label(y)?;
    Ok(match kind {
        LossKind::Squared => 0.5 * (y - z) * (y - z),
        LossKind::Hinge => (1.0 - y * z).max(0.0),
        LossKind::Logistic => log1p_exp(-y * z),
        LossKind::Exponential => (-y * z).exp(),
    })
}

/// Subgradient of the loss in `z`.  At the hinge kink (`y z = 1`) the
/// convention is 0, matching the flat branch.
pub fn loss_deriv(kind: LossKind, z: f64, y: f64) -> Result<f64> {
    kind.check_label(y)?;
    Ok(match kind {
        LossKind::Squared => z - y,
        LossKind::Hinge => {
            if y * z < 1.0 {
                -y
            } else {
                0.0
            }
        }
        LossKind::Logistic => -y / (1.0 + (y * z).exp()),
        LossKind::Exponential => -y * (-y * z).exp(),
    })
}

/// Interval of `beta` on which `phi*(-beta)` is finite.  Bounds are closed
/// where the conjugate value is finite; whether the *derivative* stays
/// bounded at an endpoint depends on the loss (see the module docs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualDomain {
    pub lo: f64,
    pub hi: f64,
}

impl DualDomain {
    pub fn contains(&self, beta: f64) -> bool {
        beta >= self.lo && beta <= self.hi
    }

    pub fn clamp(&self, beta: f64) -> f64 {
        beta.clamp(self.lo, self.hi)
    }
}

/// Dual domain for the given loss and label.  For classification losses the
/// sign of `y` mirrors the interval; `y` itself is assumed valid.
pub fn dual_domain(kind: LossKind, y: f64) -> DualDomain {
    match kind {
        LossKind::Squared => DualDomain { lo: f64::NEG_INFINITY, hi: f64::INFINITY },
        LossKind::Hinge | LossKind::Logistic => {
            if y >= 0.0 {
                DualDomain { lo: 0.0, hi: 1.0 }
            } else {
                DualDomain { lo: -1.0, hi: 0.0 }
            }
        }
        LossKind::Exponential => {
            if y >= 0.0 {
                DualDomain { lo: 0.0, hi: f64::INFINITY }
            } else {
                DualDomain { lo: f64::NEG_INFINITY, hi: 0.0 }
            }
        }
    }
}

/// `d/dbeta phi*(-beta)`.  Errors if `beta` lies outside the interval on
/// which the derivative is defined (open endpoints excluded).
pub fn conj_deriv(kind: LossKind, beta: f64, y: f64) -> Result<f64> {
    kind.check_label(y)?;
    let dom = dual_domain(kind, y);
    let out_of_domain = || Err(Error::OutOfDomain { beta, lo: dom.lo, hi: dom.hi });
    let t = beta * y;
    match kind {
        LossKind::Squared => Ok(beta - y),
        LossKind::Hinge => {
            if dom.contains(beta) {
                Ok(-y)
            } else {
                out_of_domain()
            }
        }
        LossKind::Logistic => {
            if t > 0.0 && t < 1.0 {
                Ok(y * (t.ln() - (1.0 - t).ln()))
            } else {
                out_of_domain()
            }
        }
        LossKind::Exponential => {
            if t > 0.0 {
                Ok(y * t.ln())
            } else {
                out_of_domain()
            }
        }
    }
}

/// Extended-real version of [`conj_deriv`] used by the segment scanners:
/// outside the domain (and at open endpoints where the derivative diverges)
/// it returns `-inf` on the left of the domain and `+inf` on the right, so
/// the result is monotone nondecreasing in `beta` for every loss and label.
pub(crate) fn conj_deriv_ext(kind: LossKind, beta: f64, y: f64) -> f64 {
    let dom = dual_domain(kind, y);
    match kind {
        LossKind::Squared => beta - y,
        LossKind::Hinge => {
            if beta < dom.lo {
                f64::NEG_INFINITY
            } else if beta > dom.hi {
                f64::INFINITY
            } else {
                -y
            }
        }
        LossKind::Logistic => {
            if beta <= dom.lo {
                f64::NEG_INFINITY
            } else if beta >= dom.hi {
                f64::INFINITY
            } else {
                let t = beta * y;
                y * (t.ln() - (1.0 - t).ln())
            }
        }
        LossKind::Exponential => {
            if beta <= dom.lo {
                f64::NEG_INFINITY
            } else if beta >= dom.hi {
                f64::INFINITY
            } else {
                let t = beta * y;
                y * t.ln()
            }
        }
    }
}

/// Value of `phi*(-beta)` on the closed dual domain (finite at endpoints by
/// continuity, e.g. the entropy terms of the logistic conjugate vanish at 0
/// and 1).  Used by the conjugate-consistency tests and dual-gap
/// diagnostics.
pub fn conj_value(kind: LossKind, beta: f64, y: f64) -> Result<f64> {
    kind.check_label(y)?;
    let dom = dual_domain(kind, y);
    if !dom.contains(beta) {
        return Err(Error::OutOfDomain { beta, lo: dom.lo, hi: dom.hi });
    }
    let t = beta * y;
    let xlnx = |v: f64| if v == 0.0 { 0.0 } else { v * v.ln() };
    Ok(match kind {
        LossKind::Squared => 0.5 * beta * beta - y * beta,
        LossKind::Hinge => -t,
        LossKind::Logistic => xlnx(t) + xlnx(1.0 - t),
        LossKind::Exponential => xlnx(t) - t,
    })
}

/// Root budget for the two transcendental segment equations.
const NEWTON_ITERS: usize = 50;
const TOTAL_ITERS: usize = 250;

/// Solves `d/dbeta phi*(-beta) + a*beta - b = 0` for `beta` in the dual
/// domain, clamping to the domain when the root lies outside (the clamped
/// endpoint then carries the correct one-sided derivative sign).
///
/// `a` is the nonnegative slope of the active linear segment of the coupling
/// term and `b` its offset, both already scaled by the step size.  Squared
/// and hinge losses solve in closed form; logistic and exponential use
/// safeguarded Newton (bracketed, bisection fallback) to a residual of about
/// `1e-12 * max(1, |a|, |b|)`.
pub fn solve_segment(kind: LossKind, a: f64, b: f64, y: f64) -> Result<f64> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::invalid(format!("segment slope a must be finite and >= 0, got {a}")));
    }
    if !b.is_finite() {
        return Err(Error::invalid(format!("segment offset b must be finite, got {b}")));
    }
    kind.check_label(y)?;
    match kind {
        LossKind::Squared => Ok((y + b) / (1.0 + a)),
        // The classification conjugates are mirrored through the origin for
        // y = -1, so solve the y = +1 equation with the offset negated.
        _ if y < 0.0 => Ok(-solve_segment_pos(kind, a, -b)?),
        _ => solve_segment_pos(kind, a, b),
    }
}

/// `solve_segment` specialized to y = +1 classification losses.
fn solve_segment_pos(kind: LossKind, a: f64, b: f64) -> Result<f64> {
    let tol = 1e-12 * a.abs().max(b.abs()).max(1.0);
    match kind {
        LossKind::Squared => unreachable!("handled by the caller"),
        LossKind::Hinge => {
            // psi(beta) = -1 + a beta - b on [0, 1]
            if a > 0.0 {
                Ok(((1.0 + b) / a).clamp(0.0, 1.0))
            } else if -1.0 - b < 0.0 {
                Ok(1.0)
            } else if -1.0 - b > 0.0 {
                Ok(0.0)
            } else {
                // flat dual objective: every beta in the segment is optimal
                Ok(0.0)
            }
        }
        LossKind::Logistic => {
            // psi(beta) = ln(beta / (1 - beta)) + a beta - b on (0, 1)
            let x0 = sigmoid(b / (1.0 + a));
            newton_increasing(
                |x| (x.ln() - (1.0 - x).ln()) + a * x - b,
                |x| 1.0 / (x * (1.0 - x)) + a,
                0.0,
                1.0,
                x0,
                tol,
                "logistic segment",
            )
        }
        LossKind::Exponential => {
            // psi(beta) = ln(beta) + a beta - b on (0, inf)
            if a == 0.0 {
                if b > 709.0 {
                    return Err(Error::numeric(format!(
                        "exponential segment root exp({b}) overflows"
                    )));
                }
                return Ok(b.exp());
            }
            let f1 = a - b; // psi(1)
            let (lo, hi) = if f1 < 0.0 {
                (1.0, b / a) // b > a > 0, and psi(b/a) = ln(b/a) > 0
            } else {
                // psi(exp(b - a)) = a (exp(b - a) - 1) <= 0
                (((b - a).exp()).max(f64::MIN_POSITIVE), 1.0)
            };
            let x0 = if b / a > lo && b / a < hi { b / a } else { 0.5 * (lo + hi) };
            newton_increasing(
                |x| x.ln() + a * x - b,
                |x| 1.0 / x + a,
                lo,
                hi,
                x0,
                tol,
                "exponential segment",
            )
        }
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Safeguarded Newton for a strictly increasing `f` with a root inside
/// `(lo, hi)`.  Steps that leave the bracket fall back to bisection; after
/// `NEWTON_ITERS` proposals the method switches to pure bisection.  Returns
/// the midpoint once the bracket collapses to adjacent floats, and errors
/// only if the budget runs out with a wide bracket (which the callers treat
/// as a genuine numeric failure).
fn newton_increasing(
    f: impl Fn(f64) -> f64,
    fp: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    what: &str,
) -> Result<f64> {
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    for it in 0..TOTAL_ITERS {
        let v = f(x);
        if v.is_nan() {
            return Err(Error::numeric(format!("{what}: f({x}) is NaN")));
        }
        if v.abs() <= tol {
            return Ok(x);
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let width = hi - lo;
        if width <= f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            return Ok(0.5 * (lo + hi));
        }
        x = if it < NEWTON_ITERS {
            let d = fp(x);
            let step = x - v / d;
            if step.is_finite() && step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::numeric(format!(
        "{what}: no convergence in {TOTAL_ITERS} iterations (bracket [{lo}, {hi}])"
    )))
}
