//! Resolved benchmark configuration, shared by the single-run and sweep
//! paths.  Flag parsing lives in the binary; everything here is already
//! typed, and `validate` is the single place that rejects bad combinations.

use std::path::PathBuf;

use fiol::{Algo, Error, LearnerConfig, LossKind, Penalty, Result, SolverKind, StepSchedule};

pub const DEFAULT_D: usize = 1000;

/// How long a run lasts: a fixed number of steps, or a wall-clock budget
/// under which the number of completed steps becomes part of the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Steps(u64),
    WallMs(u64),
}

/// A single step scale, or a grid of scales to sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaSpec {
    Fixed(f64),
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    InvSqrtT,
    InvSqrtHorizon,
    InvSigmaT,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ScheduleKind::Constant),
            "inv_sqrt_t" => Ok(ScheduleKind::InvSqrtT),
            "inv_sqrt_T" => Ok(ScheduleKind::InvSqrtHorizon),
            "inv_sigma_t" => Ok(ScheduleKind::InvSigmaT),
            other => Err(Error::invalid(format!("unknown schedule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub algos: Vec<Algo>,
    /// Candidate solvers; `fiol` sweeps over all of them, other learners that
    /// need a solver take the first one.
    pub solvers: Vec<SolverKind>,
    pub loss: LossKind,
    pub penalty: Penalty,
    pub schedule: ScheduleKind,
    pub eta: EtaSpec,
    /// Strong-convexity constant for the `inv_sigma_t` schedule.
    pub sigma: f64,
    pub rho: f64,
    /// Dimension of the synthetic stream; for file data a `Some` value acts
    /// as a dimension override instead.
    pub d: Option<usize>,
    pub tau: f64,
    pub budget: Budget,
    pub seed: u64,
    pub data: Option<PathBuf>,
    /// Prepended verbatim to every output file name.
    pub out: String,
}

impl BenchConfig {
    pub fn dimension(&self) -> usize {
        self.d.unwrap_or(DEFAULT_D)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algos.is_empty() {
            return Err(Error::invalid("--algo list is empty"));
        }
        if self.solvers.is_empty() {
            return Err(Error::invalid("--solver list is empty"));
        }
        self.penalty.validate()?;
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("--rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::invalid(format!("--tau must be nonnegative, got {}", self.tau)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("--sigma must be positive, got {}", self.sigma)));
        }
        if let Some(d) = self.d {
            if d == 0 {
                return Err(Error::invalid("--d must be at least 1"));
            }
        }
        match self.budget {
            Budget::Steps(0) => return Err(Error::invalid("--T must be at least 1")),
            Budget::WallMs(0) => return Err(Error::invalid("--wall-ms must be at least 1")),
            _ => {}
        }
        let scales: &[f64] = match &self.eta {
            EtaSpec::Fixed(v) => std::slice::from_ref(v),
            EtaSpec::Grid(g) => {
                if g.is_empty() {
                    return Err(Error::invalid("step-scale grid is empty"));
                }
                if self.schedule == ScheduleKind::InvSigmaT {
                    return Err(Error::invalid(
                        "the inv_sigma_t schedule has no scale to sweep; use --eta",
                    ));
                }
                g
            }
        };
        for &v in scales {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("step scale must be positive, got {v}")));
            }
        }
        if self.schedule == ScheduleKind::InvSqrtHorizon && !matches!(self.budget, Budget::Steps(_))
        {
            return Err(Error::invalid("the inv_sqrt_T schedule needs a fixed --T horizon"));
        }
        if let EtaSpec::Fixed(_) = self.eta {
            if self.algos.len() != 1 {
                return Err(Error::invalid(format!(
                    "a single run takes exactly one --algo, got {}",
                    self.algos.len()
                )));
            }
        }
        // every learner configuration that would be planned must be
        // internally consistent; catching it here makes it a usage error
        for &algo in &self.algos {
            let slots: Vec<Option<SolverKind>> = if algo == Algo::Fiol {
                self.solvers.iter().copied().map(Some).collect()
            } else {
                vec![self.solver_for(algo)]
            };
            for solver in slots {
                for &scale in scales {
                    LearnerConfig {
                        algo,
                        loss: self.loss,
                        penalty: self.penalty,
                        schedule: self.step_schedule(scale)?,
                        solver: solver.unwrap_or(SolverKind::Sort),
                        seed: 0,
                    }
                    .validate()
                    .map_err(|e| {
                        Error::invalid(format!(
                            "algo={algo} solver={}: {e}",
                            solver.map_or("-".to_string(), |s| s.to_string()),
                        ))
                    })?;
                }
            }
        }
        Ok(())
    }

    /// Concrete schedule for one cell at step scale `scale`.
    pub fn step_schedule(&self, scale: f64) -> Result<StepSchedule> {
        Ok(match self.schedule {
            ScheduleKind::Constant => StepSchedule::Constant { c: scale },
            ScheduleKind::InvSqrtT => StepSchedule::InvSqrtT { c: scale },
            ScheduleKind::InvSqrtHorizon => {
                let Budget::Steps(horizon) = self.budget else {
                    return Err(Error::invalid("inv_sqrt_T without a fixed horizon"));
                };
                StepSchedule::InvSqrtHorizon { c: scale, horizon }
            }
            ScheduleKind::InvSigmaT => StepSchedule::InvSigmaT { sigma: self.sigma },
        })
    }

    /// What the `eta_scale` column reports: the swept scale, except for the
    /// scale-free `inv_sigma_t` schedule where it reports sigma.
    pub fn eta_label(&self, scale: f64) -> f64 {
        match self.schedule {
            ScheduleKind::InvSigmaT => self.sigma,
            _ => scale,
        }
    }

    /// Output file location: the `--out` prefix glued onto `name`.
    pub fn out_path(&self, name: &str) -> PathBuf {
        PathBuf::from(format!("{}{}", self.out, name))
    }

    /// Solver slot for one learner: `fiol` cells carry their own choice, the
    /// other implicit learners take the first candidate, and the explicit
    /// learners none at all.
    pub fn solver_for(&self, algo: Algo) -> Option<SolverKind> {
        if algo.uses_dual_solver() {
            Some(self.solvers[0])
        } else {
            None
        }
    }
}

/// Parses a decade grid written as `lo..hi`, both endpoints powers of ten,
/// e.g. `1e-10..1e2` for the thirteen scales 1e-10, 1e-9, ..., 1e2.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let (lo, hi) = spec
        .split_once("..")
        .ok_or_else(|| Error::invalid(format!("grid '{spec}' must look like lo..hi")))?;
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::invalid(format!("grid endpoint '{s}' is not a number")))
    };
    let decade = |v: f64| -> Result<i32> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("grid endpoint {v} must be positive")));
        }
        let e = v.log10().round();
        if (10f64.powf(e) / v - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("grid endpoint {v} is not a power of ten")));
        }
        Ok(e as i32)
    };
    let lo = decade(parse(lo)?)?;
    let hi = decade(parse(hi)?)?;
    if lo > hi {
        return Err(Error::invalid("grid is empty: lower endpoint exceeds upper"));
    }
    Ok((lo..=hi).map(|k| 10f64.powi(k)).collect())
}
