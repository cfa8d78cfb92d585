//! Shared vocabulary: streamed examples, weight vectors, step-size schedules,
//! and the scalar primitives everything else is built from.

use crate::error::{Error, Result};

/// Feature vector of one streamed observation.
///
/// Sparse storage is an input convenience (the text reader produces it); the
/// solvers and learners operate on dense views internally.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(Vec<f64>),
    /// `(index, value)` pairs with strictly increasing indices `< dim`.
    Sparse { pairs: Vec<(usize, f64)>, dim: usize },
}

impl Features {
    pub fn dim(&self) -> usize {
        match self {
            Features::Dense(v) => v.len(),
            Features::Sparse { dim, .. } => *dim,
        }
    }

    /// Copies the features into `out` (which must have length `dim`).
    pub fn write_dense(&self, out: &mut [f64]) -> Result<()> {
        if out.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: out.len(),
            });
        }
        match self {
            Features::Dense(v) => out.copy_from_slice(v),
            Features::Sparse { pairs, .. } => {
                out.fill(0.0);
                for &(i, v) in pairs {
                    out[i] = v;
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.write_dense(&mut out).expect("length matches by construction");
        out
    }
}

/// One observation of the stream: features plus a real label.
///
/// Labels are `{-1, +1}` for the classification losses and arbitrary reals
/// for the squared loss; that check belongs to the loss, not the container.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Features,
    pub label: f64,
}

impl Example {
    /// Dense example; every entry and the label must be finite.
    pub fn dense(features: Vec<f64>, label: f64) -> Result<Self> {
        if !label.is_finite() {
            return Err(Error::invalid(format!("non-finite label {label}")));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {v}")));
        }
        Ok(Example { features: Features::Dense(features), label })
    }

    /// Sparse example with 0-based, strictly increasing indices `< dim`.
    pub fn sparse(pairs: Vec<(usize, f64)>, dim: usize, label: f64) -> Result<Self> {
        if !label.is_finite() {
            return Err(Error::invalid(format!("non-finite label {label}")));
        }
        let mut last: Option<usize> = None;
        for &(i, v) in &pairs {
            if i >= dim {
                return Err(Error::invalid(format!(
                    "sparse index {i} out of range for dimension {dim}"
                )));
            }
            if let Some(p) = last {
                if i <= p {
                    return Err(Error::invalid(format!(
                        "sparse indices must be strictly increasing ({p} then {i})"
                    )));
                }
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite feature value {v}")));
            }
            last = Some(i);
        }
        Ok(Example { features: Features::Sparse { pairs, dim }, label })
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}

/// Inner product of a feature vector with a dense weight slice.
pub fn dot(features: &Features, w: &[f64]) -> Result<f64> {
    if features.dim() != w.len() {
        return Err(Error::DimensionMismatch { expected: features.dim(), got: w.len() });
    }
    Ok(match features {
        Features::Dense(x) => x.iter().zip(w).map(|(a, b)| a * b).sum(),
        Features::Sparse { pairs, .. } => pairs.iter().map(|&(i, v)| v * w[i]).sum(),
    })
}

/// Dense weight vector.  Entries are finite by construction; learners check
/// finiteness again after every step so divergence is caught before the
/// value is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite weight {v}")));
        }
        Ok(Weights(values))
    }

    pub fn zeros(d: usize) -> Self {
        Weights(vec![0.0; d])
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Weights(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Weights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Scalar soft threshold: shrink `a` toward zero by `kappa`, with the dead
/// zone mapped to an exact (positive) floating-point zero.
#[inline]
pub fn soft_threshold_scalar(a: f64, kappa: f64) -> f64 {
    if a > kappa {
        a - kappa
    } else if a < -kappa {
        a + kappa
    } else {
        0.0
    }
}

/// Componentwise soft threshold of a weight vector.  `kappa` must be
/// nonnegative.
pub fn soft_threshold(w: &Weights, kappa: f64) -> Result<Weights> {
    if !(kappa >= 0.0) {
        return Err(Error::invalid(format!("soft threshold needs kappa >= 0, got {kappa}")));
    }
    Ok(Weights(
        w.as_slice().iter().map(|&a| soft_threshold_scalar(a, kappa)).collect(),
    ))
}

/// Step-size schedule eta_t, evaluated at 1-based step indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// eta_t = c
    Constant { c: f64 },
    /// eta_t = c / sqrt(t)
    InvSqrtT { c: f64 },
    /// eta_t = c / sqrt(T) for a horizon T known up front
    InvSqrtHorizon { c: f64, horizon: u64 },
    /// eta_t = 1 / (sigma * t), the schedule for sigma-strongly-convex runs
    InvSigmaT { sigma: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            StepSchedule::Constant { c } | StepSchedule::InvSqrtT { c } => positive("c", c),
            StepSchedule::InvSqrtHorizon { c, horizon } => {
                positive("c", c)?;
                if horizon == 0 {
                    return Err(Error::invalid("horizon must be at least 1"));
                }
                Ok(())
            }
            StepSchedule::InvSigmaT { sigma } => positive("sigma", sigma),
        }
    }

    /// Step size at step `t >= 1`.
    pub fn eta_at(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::invalid("schedules are indexed from t = 1"));
        }
        Ok(match *self {
            StepSchedule::Constant { c } => c,
            StepSchedule::InvSqrtT { c } => c / (t as f64).sqrt(),
            StepSchedule::InvSqrtHorizon { c, horizon } => c / (horizon as f64).sqrt(),
            StepSchedule::InvSigmaT { sigma } => 1.0 / (sigma * t as f64),
        })
    }
}
