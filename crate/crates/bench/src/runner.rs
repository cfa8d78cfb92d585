//! Runs one (learner, solver, step-scale) cell against a data source and
//! reduces it to a summary row.
//!
//! Synthetic streams carry their generating weights, so the regret column is
//! measured against those; file datasets get a batch proximal-gradient
//! comparator instead.  Classification losses on synthetic streams see the
//! sign of the regression response as their label.

use std::time::Instant;

use fiol::{
    batch_comparator, dot, loss_value, progressive_objective, regret, sparsity_count, Algo, Error,
    Example, Learner, LearnerConfig, LossKind, Result, RunRecord, SolverKind, SyntheticConfig,
    Weights,
};

use crate::config::{BenchConfig, Budget, EtaSpec};
use crate::csv::SummaryRow;

/// Outcome of one cell.  `scale` is the swept step scale, `value` the
/// progressive objective (mean regularized loss at the iterates played).
#[derive(Debug)]
pub struct CellResult {
    pub algo: Algo,
    pub solver: Option<SolverKind>,
    pub scale: f64,
    pub record: RunRecord,
    pub value: f64,
    pub regret: f64,
    pub wall_ms: f64,
}

impl CellResult {
    pub fn diverged(&self) -> bool {
        self.record.diverged.is_some()
    }

    pub fn summary_row(&self, cfg: &BenchConfig) -> SummaryRow {
        SummaryRow {
            algo: self.algo.name().to_string(),
            solver: self.solver.map_or_else(|| "-".to_string(), |s| s.name().to_string()),
            eta_scale: cfg.eta_label(self.scale),
            rho: cfg.rho,
            lambda: cfg.penalty.lambda(),
            steps: self.record.rows.len() as u64,
            value: self.value,
            regret: self.regret,
            sum_delta: self.record.sum_delta(),
            sparsity: sparsity_count(self.record.final_w.as_slice()),
            diverged: self.diverged(),
            wall_ms: self.wall_ms,
        }
    }
}

/// Loads `--data` if present; a file with no examples is rejected here so
/// every later stage may assume a nonempty source.
pub fn load_file_data(cfg: &BenchConfig) -> Result<Option<Vec<Example>>> {
    let Some(path) = &cfg.data else { return Ok(None) };
    let examples = fiol::read_sparse_text(path, cfg.d)?;
    if examples.is_empty() {
        return Err(Error::invalid(format!("data file {} has no examples", path.display())));
    }
    Ok(Some(examples))
}

pub fn run_cell(
    cfg: &BenchConfig,
    algo: Algo,
    solver: Option<SolverKind>,
    scale: f64,
    seed: u64,
    file: Option<&[Example]>,
) -> Result<CellResult> {
    let lcfg = LearnerConfig {
        algo,
        loss: cfg.loss,
        penalty: cfg.penalty,
        schedule: cfg.step_schedule(scale)?,
        solver: solver.unwrap_or(SolverKind::Sort),
        seed,
    };
    lcfg.validate()?;
    let map_labels = cfg.loss != LossKind::Squared && file.is_none();

    let mut synth = None;
    let mut w_ref = Vec::new();
    let d = match file {
        Some(examples) => examples[0].dim(),
        None => {
            let d = cfg.dimension();
            let stream =
                SyntheticConfig { d, rho: cfg.rho, tau: cfg.tau, seed }.stream()?;
            w_ref = stream.reference_weights().to_vec();
            synth = Some(stream);
            d
        }
    };
    let pen_ref = cfg.penalty.value(&w_ref);

    let mut learner = Learner::new(lcfg, d)?;
    let mut rows = Vec::new();
    let mut diverged = None;
    let mut star_sum = 0.0;
    let mut file_iter = file.map(|ex| ex.iter());
    let started = Instant::now();
    loop {
        match cfg.budget {
            Budget::Steps(t) if rows.len() as u64 >= t => break,
            Budget::WallMs(ms) if started.elapsed().as_millis() as u64 >= ms => break,
            _ => {}
        }
        let ex = match (&mut synth, &mut file_iter) {
            (Some(stream), _) => stream.next().expect("synthetic streams are infinite"),
            (None, Some(iter)) => match iter.next() {
                Some(ex) => ex.clone(),
                None => break,
            },
            (None, None) => unreachable!("either a stream or a file is set"),
        };
        let ex = if map_labels {
            Example { label: if ex.label >= 0.0 { 1.0 } else { -1.0 }, ..ex }
        } else {
            ex
        };
        match learner.step(&ex) {
            Ok(stats) => {
                if synth.is_some() {
                    let z = dot(&ex.features, &w_ref)?;
                    star_sum += loss_value(cfg.loss, z, ex.label)? + pen_ref;
                }
                rows.push(stats.row());
            }
            Err(Error::Diverged { step }) => {
                diverged = Some(step);
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let record =
        RunRecord { rows, final_w: Weights::new(learner.weights().to_vec())?, diverged };
    let value = progressive_objective(&record).unwrap_or(f64::INFINITY);
    let regret_val = if record.diverged.is_some() {
        f64::INFINITY
    } else if let Some(examples) = file {
        let used = &examples[..record.rows.len()];
        // best effort: the comparator solve can stall on nonsmooth losses
        match batch_comparator(used, cfg.loss, cfg.penalty, 1e-8, 5_000) {
            Ok(comp) => regret(&record, used, &comp.w, cfg.loss, cfg.penalty)?.regret,
            Err(_) => f64::INFINITY,
        }
    } else {
        record.rows.iter().map(|r| r.inst_loss).sum::<f64>() - star_sum
    };
    Ok(CellResult {
        algo,
        solver,
        scale,
        record,
        value,
        regret: regret_val,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Single-run mode: one cell, plus `steps.csv` and `summary.csv` artifacts.
pub fn run_single(cfg: &BenchConfig) -> Result<CellResult> {
    let EtaSpec::Fixed(scale) = cfg.eta else {
        return Err(Error::invalid("single-run mode needs --eta, not a grid"));
    };
    let file = load_file_data(cfg)?;
    let algo = cfg.algos[0];
    let cell = run_cell(cfg, algo, cfg.solver_for(algo), scale, cfg.seed, file.as_deref())?;
    crate::csv::write_steps(&cfg.out_path("steps.csv"), &cell.record)?;
    crate::csv::write_summary(&cfg.out_path("summary.csv"), &[cell.summary_row(cfg)])?;
    Ok(cell)
}
