//! Regularizers: none, l1, and squared-l2, with values, subgradients, and
//! proximal maps.

use crate::error::{Error, Result};
use crate::types::soft_threshold_scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    None,
    /// lambda * ||w||_1
    L1 { lambda: f64 },
    /// (lambda / 2) * ||w||_2^2
    L2 { lambda: f64 },
}

impl Penalty {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Penalty::None => Ok(()),
            Penalty::L1 { lambda } | Penalty::L2 { lambda } => {
                if lambda.is_finite() && lambda >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("penalty weight must be >= 0, got {lambda}")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Penalty::None => "none",
            Penalty::L1 { .. } => "l1",
            Penalty::L2 { .. } => "l2",
        }
    }

    /// The regularization weight, 0 for `None`.
    pub fn lambda(&self) -> f64 {
        match *self {
            Penalty::None => 0.0,
            Penalty::L1 { lambda } | Penalty::L2 { lambda } => lambda,
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        match *self {
            Penalty::None => 0.0,
            Penalty::L1 { lambda } => lambda * w.iter().map(|v| v.abs()).sum::<f64>(),
            Penalty::L2 { lambda } => 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    /// Subgradient, with the l1 kink at 0 resolved to 0 (the minimum-norm
    /// element, so a subgradient step leaves zero coordinates untouched).
    pub fn subgrad(&self, w: &[f64]) -> Vec<f64> {
        match *self {
            Penalty::None => vec![0.0; w.len()],
            Penalty::L1 { lambda } => w
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        lambda
                    } else if v < 0.0 {
                        -lambda
                    } else {
                        0.0
                    }
                })
                .collect(),
            Penalty::L2 { lambda } => w.iter().map(|&v| lambda * v).collect(),
        }
    }

    /// Proximal map `argmin_u { pen(u) + ||u - w||^2 / (2 eta) }`.
    pub fn prox(&self, w: &[f64], eta: f64) -> Result<Vec<f64>> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!("prox step must be positive, got {eta}")));
        }
        Ok(match *self {
            Penalty::None => w.to_vec(),
            Penalty::L1 { lambda } => {
                let kappa = lambda * eta;
                w.iter().map(|&v| soft_threshold_scalar(v, kappa)).collect()
            }
            Penalty::L2 { lambda } => {
                let scale = 1.0 / (1.0 + lambda * eta);
                w.iter().map(|&v| scale * v).collect()
            }
        })
    }
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
