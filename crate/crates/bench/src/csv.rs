//! CSV emission.  Schemas are fixed: downstream tooling greps the headers, so
//! they must not drift.  Floats are written with 17 significant digits, which
//! round-trips every finite f64; infinities come out as `inf`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use fiol::{Result, RunRecord};

pub const STEPS_HEADER: &str = "t,eta,inst_loss,delta_t,nonzeros,elapsed_ns";
pub const SUMMARY_HEADER: &str =
    "algo,solver,eta_scale,rho,lambda,T,value,regret,sum_delta,sparsity,diverged,wall_ms";

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One line of `summary.csv`, `sweep.csv`, or `best.csv`.  `solver` is `-`
/// for learners that never touch the dual solver; `steps` is the number of
/// steps actually completed.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub algo: String,
    pub solver: String,
    pub eta_scale: f64,
    pub rho: f64,
    pub lambda: f64,
    pub steps: u64,
    pub value: f64,
    pub regret: f64,
    pub sum_delta: f64,
    pub sparsity: usize,
    pub diverged: bool,
    pub wall_ms: f64,
}

impl SummaryRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.algo,
            self.solver,
            fmt_float(self.eta_scale),
            fmt_float(self.rho),
            fmt_float(self.lambda),
            self.steps,
            fmt_float(self.value),
            fmt_float(self.regret),
            fmt_float(self.sum_delta),
            self.sparsity,
            self.diverged,
            fmt_float(self.wall_ms),
        )
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_steps(path: &Path, record: &RunRecord) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{STEPS_HEADER}")?;
    for row in &record.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.t,
            fmt_float(row.eta),
            fmt_float(row.inst_loss),
            fmt_float(row.delta_t),
            row.nonzeros,
            row.elapsed_ns,
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{SUMMARY_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_line())?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_and_infinity_is_literal() {
        for v in [0.45, -1.0 / 3.0, 1e-300, 6.02214076e23] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn summary_line_layout() {
        let row = SummaryRow {
            algo: "fiol".into(),
            solver: "sort".into(),
            eta_scale: 0.01,
            rho: 0.5,
            lambda: 0.1,
            steps: 10,
            value: 1.5,
            regret: f64::INFINITY,
            sum_delta: 0.25,
            sparsity: 3,
            diverged: true,
            wall_ms: 12.5,
        };
        let line = row.to_line();
        assert_eq!(line.split(',').count(), SUMMARY_HEADER.split(',').count());
        assert!(line.starts_with("fiol,sort,1.0000000000000000e-2,"));
        assert!(line.contains(",inf,"));
        assert!(line.contains(",true,"));
    }
}
