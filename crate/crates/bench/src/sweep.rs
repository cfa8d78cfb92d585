//! Step-size sweeps: enumerate the (learner, solver, scale) cells, run them
//! in parallel with per-cell seeds, and keep the best scale per learner.
//!
//! `fiol` gets one cell per requested solver; the other implicit learners
//! take the first solver; the explicit ones none.  Cell k runs with seed
//! `base + k`, so results do not depend on scheduling order.

use rayon::prelude::*;

use fiol::{Algo, Error, LearnerConfig, Result, SolverKind};

use crate::config::{BenchConfig, EtaSpec};
use crate::csv::SummaryRow;
use crate::runner::{load_file_data, run_cell, CellResult};

#[derive(Debug, Clone, Copy)]
pub struct CellSpec {
    pub algo: Algo,
    pub solver: Option<SolverKind>,
    pub scale: f64,
    pub index: u64,
}

pub fn plan(cfg: &BenchConfig) -> Result<Vec<CellSpec>> {
    let grid: Vec<f64> = match &cfg.eta {
        EtaSpec::Grid(g) => g.clone(),
        EtaSpec::Fixed(v) => vec![*v],
    };
    let mut specs = Vec::new();
    for &algo in &cfg.algos {
        let slots: Vec<Option<SolverKind>> = if algo == Algo::Fiol {
            cfg.solvers.iter().copied().map(Some).collect()
        } else {
            vec![cfg.solver_for(algo)]
        };
        for solver in slots {
            for &scale in &grid {
                let index = specs.len() as u64;
                specs.push(CellSpec { algo, solver, scale, index });
            }
        }
    }
    for spec in &specs {
        let lcfg = LearnerConfig {
            algo: spec.algo,
            loss: cfg.loss,
            penalty: cfg.penalty,
            schedule: cfg.step_schedule(spec.scale)?,
            solver: spec.solver.unwrap_or(SolverKind::Sort),
            seed: 0,
        };
        lcfg.validate().map_err(|e| {
            Error::invalid(format!(
                "cell algo={} solver={}: {e}",
                spec.algo,
                spec.solver.map_or("-".to_string(), |s| s.to_string()),
            ))
        })?;
    }
    Ok(specs)
}

/// Rayon pool for the sweep, capped by the `FIOL_THREADS` environment
/// variable when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("FIOL_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                Error::invalid(format!("FIOL_THREADS must be a positive integer, got '{raw}'"))
            })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::invalid(format!("failed to build the sweep thread pool: {e}")))
}

pub struct SweepOutcome {
    /// One result per planned cell, in plan order.
    pub cells: Vec<CellResult>,
    /// For each (learner, solver) group in order of first appearance, the
    /// index into `cells` of its best cell: lowest progressive objective
    /// among the non-diverged ones, or — if every scale diverged — the
    /// least-bad diverged cell.
    pub best: Vec<usize>,
}

impl SweepOutcome {
    pub fn sweep_rows(&self, cfg: &BenchConfig) -> Vec<SummaryRow> {
        self.cells.iter().map(|c| c.summary_row(cfg)).collect()
    }

    pub fn best_rows(&self, cfg: &BenchConfig) -> Vec<SummaryRow> {
        self.best.iter().map(|&i| self.cells[i].summary_row(cfg)).collect()
    }

    pub fn best_cell(&self, algo: Algo, solver: Option<SolverKind>) -> Option<&CellResult> {
        self.best
            .iter()
            .map(|&i| &self.cells[i])
            .find(|c| c.algo == algo && c.solver == solver)
    }
}

pub fn run_sweep(cfg: &BenchConfig) -> Result<SweepOutcome> {
    let specs = plan(cfg)?;
    let file = load_file_data(cfg)?;
    let file_ref = file.as_deref();
    let pool = thread_pool()?;
    let cells = pool.install(|| {
        specs
            .par_iter()
            .map(|s| run_cell(cfg, s.algo, s.solver, s.scale, cfg.seed.wrapping_add(s.index), file_ref))
            .collect::<Result<Vec<CellResult>>>()
    })?;
    let best = pick_best(&cells);
    Ok(SweepOutcome { cells, best })
}

fn pick_best(cells: &[CellResult]) -> Vec<usize> {
    let mut groups: Vec<((Algo, Option<SolverKind>), usize)> = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let key = (cell.algo, cell.solver);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            None => groups.push((key, i)),
            Some((_, slot)) => {
                if better(cell, &cells[*slot]) {
                    *slot = i;
                }
            }
        }
    }
    groups.into_iter().map(|(_, i)| i).collect()
}

/// Strict ordering, so ties keep the earlier (smaller) scale.
fn better(a: &CellResult, b: &CellResult) -> bool {
    if a.diverged() != b.diverged() {
        return b.diverged();
    }
    a.value < b.value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Budget, ScheduleKind};
    use fiol::{LossKind, Penalty};

    fn cfg() -> BenchConfig {
        BenchConfig {
            algos: vec![Algo::Sgd, Algo::Fiol],
            solvers: vec![SolverKind::Sort, SolverKind::Partition],
            loss: LossKind::Squared,
            penalty: Penalty::L1 { lambda: 0.1 },
            schedule: ScheduleKind::Constant,
            eta: EtaSpec::Grid(vec![1e-3, 1e-2, 1e-1]),
            sigma: 0.1,
            rho: 0.0,
            d: Some(6),
            tau: 0.2,
            budget: Budget::Steps(40),
            seed: 5,
            data: None,
            out: String::new(),
        }
    }

    #[test]
    fn plan_expands_fiol_across_solvers_only() {
        let specs = plan(&cfg()).unwrap();
        // sgd: 3 cells; fiol-sort: 3; fiol-partition: 3
        assert_eq!(specs.len(), 9);
        assert!(specs.iter().take(3).all(|s| s.algo == Algo::Sgd && s.solver.is_none()));
        assert_eq!(specs.iter().filter(|s| s.solver == Some(SolverKind::Partition)).count(), 3);
        assert_eq!(specs.iter().map(|s| s.index).collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn sweep_keeps_one_best_per_group() {
        let outcome = run_sweep(&cfg()).unwrap();
        assert_eq!(outcome.cells.len(), 9);
        assert_eq!(outcome.best.len(), 3);
        let rows = outcome.best_rows(&cfg());
        assert_eq!(rows[0].algo, "sgd");
        assert_eq!(rows[1].solver, "sort");
        assert_eq!(rows[2].solver, "partition");
        for (i, &b) in outcome.best.iter().enumerate() {
            let best = &outcome.cells[b];
            let group: Vec<_> =
                outcome.cells.iter().filter(|c| (c.algo, c.solver) == (best.algo, best.solver)).collect();
            assert_eq!(group.len(), 3, "group {i}");
            if !best.diverged() {
                assert!(group.iter().filter(|c| !c.diverged()).all(|c| best.value <= c.value));
            }
        }
    }

    #[test]
    fn invalid_cells_are_rejected_before_running() {
        let mut c = cfg();
        c.solvers = vec![SolverKind::ClosedForm];
        // closed form with an active l1 penalty cannot soft-threshold
        assert!(plan(&c).is_err());
    }
}
