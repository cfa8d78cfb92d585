//! The per-step proximal subproblem and its one-dimensional dual.
//!
//! A fully implicit step solves
//!
//! ```text
//! min_w  phi(<x, w>)  +  lambda ||w||_1  +  ||w - what||^2 / (2 eta)
//! ```
//!
//! for one example `(x, y)` around the anchor `what`.  Because the loss
//! touches `w` only through the scalar `<x, w>`, the Fenchel dual is a
//! one-dimensional problem in `beta`:
//!
//! ```text
//! minimize  varphi(beta) = phi*(-beta) + l*(beta x)
//! ```
//!
//! where `l` collects the l1 term and the proximal anchor.  Its derivative
//! splits into the conjugate part (see [`crate::losses`]) and the response
//!
//! ```text
//! r(beta) = d/dbeta l*(beta x) = <x, S(what + eta beta x, lambda eta)>
//! ```
//!
//! with `S` the componentwise soft threshold.  `r` is a continuous,
//! nondecreasing, piecewise-linear function of `beta`.  Each nonzero
//! coordinate contributes two knots
//!
//! ```text
//! u_i = -(what_i - sign(x_i) lambda eta) / (eta x_i)     weight  +x_i^2
//! v_i = -(what_i + sign(x_i) lambda eta) / (eta x_i)     weight  -x_i^2
//! ```
//!
//! (always `v_i <= u_i`; the coordinate is dead between them), giving the
//! closed form
//!
//! ```text
//! r(beta) = eta * [ sum_k z_k max(beta - mu_k, 0) + p1 beta - q1 ]
//! p1 = sum_i x_i^2,   q1 = sum_i x_i^2 v_i
//! ```
//!
//! Three root finders for `varphi'(beta) = 0` are provided: plain bisection,
//! a sort-and-scan over the knots (`O(d log d)`), and a quickselect-style
//! partition scheme with expected `O(d)` work.  All of them agree to within
//! accumulation error; [`recover_primal`] turns the root back into the
//! unique primal solution.

use rand::Rng;

use crate::error::{Error, Result};
use crate::losses::{conj_deriv_ext, dual_domain, loss_value, solve_segment, LossKind};
use crate::types::{soft_threshold_scalar, Weights};

/// Borrowed view of one proximal subproblem.  Feature and anchor slices must
/// have equal length and contain only finite values (guaranteed by the
/// `Example`/`Weights` constructors upstream).
#[derive(Debug, Clone, Copy)]
pub struct Subproblem<'a> {
    pub x: &'a [f64],
    pub w_hat: &'a [f64],
    pub eta: f64,
    pub lambda: f64,
    pub loss: LossKind,
    pub y: f64,
}

impl<'a> Subproblem<'a> {
    pub fn new(
        x: &'a [f64],
        w_hat: &'a [f64],
        eta: f64,
        lambda: f64,
        loss: LossKind,
        y: f64,
    ) -> Result<Self> {
        let sub = Subproblem { x, w_hat, eta, lambda, loss, y };
        sub.check()?;
        Ok(sub)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.x.len() != self.w_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: self.x.len(),
                got: self.w_hat.len(),
            });
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Primal objective value at `w`.
    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: self.x.len(), got: w.len() });
        }
        let z: f64 = self.x.iter().zip(w).map(|(a, b)| a * b).sum();
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        let anchor: f64 =
            w.iter().zip(self.w_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                / (2.0 * self.eta);
        Ok(loss_value(self.loss, z, self.y)? + self.lambda * l1 + anchor)
    }
}

/// Knots of the piecewise-linear response, plus the coefficients of its
/// leftmost segment.
#[derive(Debug, Clone)]
pub struct BreakpointSet {
    /// Knot locations, one `u` and one `v` per nonzero coordinate of `x`.
    pub mu: Vec<f64>,
    /// Slope increments at the knots: `+x_i^2` at `u_i`, `-x_i^2` at `v_i`.
    pub z: Vec<f64>,
    /// `sum x_i^2` over nonzero coordinates.
    pub p1: f64,
    /// `sum x_i^2 v_i` over nonzero coordinates.
    pub q1: f64,
    /// Coordinates with `x_i == 0`; they never couple to `beta` and are
    /// handled by the primal recovery alone.
    pub zero_coords: Vec<usize>,
}

impl BreakpointSet {
    /// Number of knots (twice the number of nonzero coordinates).
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Computes the knots of the response for one subproblem.
pub fn build_breakpoints(sub: &Subproblem) -> BreakpointSet {
    let m = sub.x.len();
    let kappa = sub.lambda * sub.eta;
    let mut mu = Vec::with_capacity(2 * m);
    let mut z = Vec::with_capacity(2 * m);
    let mut zero_coords = Vec::new();
    let mut p1 = 0.0;
    let mut q1 = 0.0;
    // first all u knots, then all v knots
    for (i, (&xi, &wi)) in sub.x.iter().zip(sub.w_hat).enumerate() {
        if xi == 0.0 {
            zero_coords.push(i);
            continue;
        }
        let s = if xi > 0.0 { kappa } else { -kappa };
        mu.push(-(wi - s) / (sub.eta * xi));
        z.push(xi * xi);
        p1 += xi * xi;
    }
    for (&xi, &wi) in sub.x.iter().zip(sub.w_hat) {
        if xi == 0.0 {
            continue;
        }
        let s = if xi > 0.0 { kappa } else { -kappa };
        let v = -(wi + s) / (sub.eta * xi);
        mu.push(v);
        z.push(-xi * xi);
        q1 += xi * xi * v;
    }
    BreakpointSet { mu, z, p1, q1, zero_coords }
}

/// Response evaluated straight from the definition,
/// `sum_i x_i (max(what_i + eta beta x_i - lambda eta, 0)
///           + min(what_i + eta beta x_i + lambda eta, 0))`.
pub fn response_direct(sub: &Subproblem, beta: f64) -> f64 {
    let kappa = sub.lambda * sub.eta;
    sub.x
        .iter()
        .zip(sub.w_hat)
        .map(|(&xi, &wi)| {
            let s = wi + sub.eta * beta * xi;
            xi * ((s - kappa).max(0.0) + (s + kappa).min(0.0))
        })
        .sum()
}

/// Response evaluated through the knot representation.  Must agree with
/// [`response_direct`] up to accumulation error; the equality of the two
/// routes is what the solvers rely on.
pub fn response_from_breakpoints(bps: &BreakpointSet, eta: f64, beta: f64) -> f64 {
    let knots: f64 = bps
        .mu
        .iter()
        .zip(&bps.z)
        .map(|(&mu, &z)| z * (beta - mu).max(0.0))
        .sum();
    eta * (knots + bps.p1 * beta - bps.q1)
}

/// Derivative of the dual objective: conjugate part plus response.
pub fn dual_deriv(sub: &Subproblem, bps: &BreakpointSet, beta: f64) -> f64 {
    conj_deriv_ext(sub.loss, beta, sub.y) + response_from_breakpoints(bps, sub.eta, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Bisection,
    Sort,
    Partition,
    /// Ridge-only closed form; see [`ridge_closed_form`].
    ClosedForm,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bisection => "bisection",
            SolverKind::Sort => "sort",
            SolverKind::Partition => "partition",
            SolverKind::ClosedForm => "closed_form",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bisection" => Ok(SolverKind::Bisection),
            "sort" => Ok(SolverKind::Sort),
            "partition" => Ok(SolverKind::Partition),
            "closed_form" => Ok(SolverKind::ClosedForm),
            other => Err(Error::invalid(format!("unknown solver '{other}'"))),
        }
    }
}

/// Root of the dual derivative plus the linear segment it was solved on.
#[derive(Debug, Clone, Copy)]
pub struct DualSolution {
    pub beta: f64,
    /// Slope `eta * p` of the response on the active segment.
    pub segment_a: f64,
    /// Offset `eta * q`; the segment reads `segment_a * beta - segment_b`.
    pub segment_b: f64,
    pub solver: SolverKind,
    /// Knots scanned (sort), rounds (partition), or function evaluations
    /// (bisection).
    pub iterations: usize,
}

/// Soft-threshold recovery of the unique primal solution from a dual root.
pub fn recover_primal(sub: &Subproblem, beta: f64) -> Weights {
    let kappa = sub.lambda * sub.eta;
    let values = sub
        .w_hat
        .iter()
        .zip(sub.x)
        .map(|(&wi, &xi)| soft_threshold_scalar(wi + sub.eta * beta * xi, kappa))
        .collect();
    Weights::from_vec_unchecked(values)
}

/// Segment coefficients at a given `beta`, reconstructed by a linear pass
/// (used where a solver does not track them itself).
fn segment_at(bps: &BreakpointSet, eta: f64, beta: f64) -> (f64, f64) {
    let mut p = bps.p1;
    let mut q = bps.q1;
    for (&mu, &z) in bps.mu.iter().zip(&bps.z) {
        if mu <= beta {
            p += z;
            q += z * mu;
        }
    }
    // p is a sum of x_i^2 terms that later cancel exactly; rounding can
    // leave a tiny negative residue where the true slope is >= 0
    ((eta * p).max(0.0), eta * q)
}

/// Bisection on the dual derivative: expand from 0 to bracket a sign change
/// (clamped to the dual domain; an endpoint with the wrong sign is itself
/// the solution), then bisect until `|varphi'(mid)| < eps`.
pub fn solve_bisection(sub: &Subproblem, eps: f64) -> Result<DualSolution> {
    sub.check()?;
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("bisection tolerance must be positive, got {eps}")));
    }
    let bps = build_breakpoints(sub);
    let dom = dual_domain(sub.loss, sub.y);
    let mut evals = 0usize;
    let mut phi = |beta: f64| -> Result<f64> {
        evals += 1;
        let v = dual_deriv(sub, &bps, beta);
        if v.is_nan() {
            return Err(Error::numeric(format!("dual derivative is NaN at beta = {beta}")));
        }
        Ok(v)
    };

    let finish = |beta: f64, evals: usize, bps: &BreakpointSet| {
        let (a, b) = segment_at(bps, sub.eta, beta);
        Ok(DualSolution {
            beta,
            segment_a: a,
            segment_b: b,
            solver: SolverKind::Bisection,
            iterations: evals,
        })
    };

    let start = dom.clamp(0.0);
    let v0 = phi(start)?;
    if v0 == 0.0 {
        return finish(start, evals, &bps);
    }
    // Expand away from `start` on the side the root must lie on.
    let (mut lo, mut hi);
    if v0 > 0.0 {
        hi = start;
        let mut step = 1.0;
        loop {
            let cand = (start - step).max(dom.lo);
            let v = phi(cand)?;
            if v <= 0.0 {
                lo = cand;
                break;
            }
            if cand == dom.lo {
                // derivative positive on the whole domain: minimum at lo
                return finish(dom.lo, evals, &bps);
            }
            step *= 2.0;
            if !step.is_finite() {
                return Err(Error::numeric("bisection bracket expansion overflow"));
            }
        }
    } else {
        lo = start;
        let mut step = 1.0;
        loop {
            let cand = (start + step).min(dom.hi);
            let v = phi(cand)?;
            if v >= 0.0 {
                hi = cand;
                break;
            }
            if cand == dom.hi {
                return finish(dom.hi, evals, &bps);
            }
            step *= 2.0;
            if !step.is_finite() {
                return Err(Error::numeric("bisection bracket expansion overflow"));
            }
        }
    }

    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        let v = phi(mid)?;
        if v.abs() < eps {
            return finish(mid, evals, &bps);
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            // adjacent floats; return the best representable root
            return finish(0.5 * (lo + hi), evals, &bps);
        }
    }
    Err(Error::numeric(format!(
        "bisection failed to reach eps = {eps} (bracket [{lo}, {hi}])"
    )))
}

/// Sort-and-scan solver: order the knots, walk left to right accumulating
/// segment coefficients, stop at the first knot where the dual derivative
/// turns nonnegative, and solve that segment in closed form.
pub fn solve_sort(sub: &Subproblem) -> Result<DualSolution> {
    sub.check()?;
    let bps = build_breakpoints(sub);
    let mut order: Vec<u32> = (0..bps.len() as u32).collect();
    order.sort_unstable_by(|&i, &j| {
        bps.mu[i as usize].partial_cmp(&bps.mu[j as usize]).expect("knots are finite")
    });

    let eta = sub.eta;
    let mut p = bps.p1;
    let mut q = bps.q1;
    let mut seg_lo = f64::NEG_INFINITY;
    let mut seg_hi = f64::INFINITY;
    let mut scanned = 0usize;
    for &k in &order {
        let k = k as usize;
        let mu_k = bps.mu[k];
        scanned += 1;
        let c = conj_deriv_ext(sub.loss, mu_k, sub.y);
        // derivative at the knot, evaluated with this segment's coefficients
        let nonneg = if c == f64::INFINITY {
            true
        } else if c == f64::NEG_INFINITY {
            false
        } else {
            c + eta * p * mu_k - eta * q >= 0.0
        };
        if nonneg {
            seg_hi = mu_k;
            break;
        }
        seg_lo = mu_k;
        p += bps.z[k];
        q += bps.z[k] * mu_k;
    }

    // cancellation in p can leave a tiny negative residue on segments whose
    // true slope is zero (all coordinates in the dead zone)
    let a = (eta * p).max(0.0);
    let b = eta * q;
    let beta = solve_segment(sub.loss, a, b, sub.y)?.clamp(seg_lo, seg_hi);
    Ok(DualSolution { beta, segment_a: a, segment_b: b, solver: SolverKind::Sort, iterations: scanned })
}

/// Partition solver: quickselect-style narrowing of the knot set.  Each
/// round picks a random pivot knot, tests the dual derivative there, and
/// either absorbs every knot at or below the pivot into the running segment
/// coefficients (root is to the right) or discards the pivot and everything
/// above it (root is at or to the left).  The candidate set shrinks every
/// round, giving expected linear total work.
pub fn solve_partition<R: Rng + ?Sized>(sub: &Subproblem, rng: &mut R) -> Result<DualSolution> {
    sub.check()?;
    let bps = build_breakpoints(sub);
    let eta = sub.eta;
    let mut items: Vec<(f64, f64)> =
        bps.mu.iter().copied().zip(bps.z.iter().copied()).collect();
    let mut p = bps.p1;
    let mut q = bps.q1;
    let mut lo = 0usize;
    let mut len = items.len();
    let mut rounds = 0usize;
    while len > 0 {
        rounds += 1;
        let pivot = lo + rng.random_range(0..len);
        let (pivot_mu, pivot_z) = items[pivot];
        // Partition the active slice around the pivot value; knots equal to
        // the pivot go left with it.
        items.swap(pivot, lo + len - 1);
        let mut store = lo;
        let mut dp = pivot_z;
        let mut dq = pivot_z * pivot_mu;
        for j in lo..lo + len - 1 {
            let (mu_j, z_j) = items[j];
            if mu_j <= pivot_mu {
                dp += z_j;
                dq += z_j * mu_j;
                items.swap(j, store);
                store += 1;
            }
        }
        items.swap(store, lo + len - 1);
        // active slice is now [lo, store] = knots <= pivot (pivot at store),
        // and (store, lo+len) = knots > pivot
        let c = conj_deriv_ext(sub.loss, pivot_mu, sub.y);
        let negative = if c == f64::NEG_INFINITY {
            true
        } else if c == f64::INFINITY {
            false
        } else {
            c + eta * (p + dp) * pivot_mu - eta * (q + dq) < 0.0
        };
        let old_len = len;
        if negative {
            // root lies right of the pivot: absorb the left block for good
            p += dp;
            q += dq;
            let new_lo = store + 1;
            len = lo + len - new_lo;
            lo = new_lo;
        } else {
            // root at or left of the pivot: drop the pivot and the right block
            len = store - lo;
        }
        debug_assert!(len < old_len, "candidate set must shrink every round");
    }
    // see solve_sort: rounding can leave the zero-slope case tiny-negative
    let a = (eta * p).max(0.0);
    let b = eta * q;
    let beta = solve_segment(sub.loss, a, b, sub.y)?;
    Ok(DualSolution {
        beta,
        segment_a: a,
        segment_b: b,
        solver: SolverKind::Partition,
        iterations: rounds,
    })
}

/// Exact minimizer of the squared-loss subproblem with an l2 penalty,
///
/// ```text
/// min_w 0.5 (y - <x, w>)^2 + (lambda2 / 2) ||w||^2 + ||w - what||^2 / (2 eta)
/// ```
///
/// by Sherman-Morrison on the rank-one normal equations.  With
/// `s = 1 + lambda2 eta`:
///
/// ```text
/// w = (what - alpha x) / s,
/// alpha = eta (<x, what> - s y) / (s + eta ||x||^2)
/// ```
///
/// For `lambda2 = 0` this reduces to the familiar passive-aggressive update
/// `what - eta (<x, what> - y) / (1 + eta ||x||^2) x`, and for `x = 0` to
/// the pure l2 shrinkage `what / (1 + lambda2 eta)`.
pub fn ridge_closed_form(
    x: &[f64],
    y: f64,
    w_hat: &[f64],
    eta: f64,
    lambda2: f64,
) -> Result<Weights> {
    if x.len() != w_hat.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: w_hat.len() });
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if !(lambda2 >= 0.0) || !lambda2.is_finite() {
        return Err(Error::invalid(format!("lambda2 must be >= 0, got {lambda2}")));
    }
    let s = 1.0 + lambda2 * eta;
    let xw: f64 = x.iter().zip(w_hat).map(|(a, b)| a * b).sum();
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let alpha = eta * (xw - s * y) / (s + eta * xx);
    let values = w_hat.iter().zip(x).map(|(&wi, &xi)| (wi - alpha * xi) / s).collect();
    Ok(Weights::from_vec_unchecked(values))
}
