//! Command-line benchmark driver.  Exit codes: 0 for completed experiments
//! (a diverged learner is a result, not an error), 2 for flag or
//! configuration problems, 1 for runtime failures such as unreadable data.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;

use fiol::{Algo, Error, LossKind, Penalty, Result, SolverKind};
use fiol_bench::config::{parse_grid, BenchConfig, Budget, EtaSpec, ScheduleKind};
use fiol_bench::csv;
use fiol_bench::runner;
use fiol_bench::sweep;

/// Online-learning benchmark driver: single runs and step-size sweeps with
/// CSV output.
#[derive(Parser, Debug)]
#[command(name = "fiol-bench", version)]
struct Cli {
    /// Comma-separated learners: sgd, comid, isgd, pa, fiol.
    #[arg(long, default_value = "sgd,comid,isgd,fiol")]
    algo: String,
    /// Comma-separated dual solvers: sort, partition, bisection, closed_form.
    /// `fiol` sweeps over all of them; isgd/pa use the first.
    #[arg(long, default_value = "sort,partition")]
    solver: String,
    /// Loss: squared, hinge, logistic, exponential.
    #[arg(long, default_value = "squared")]
    loss: String,
    /// Penalty: none, l1, l2.
    #[arg(long, default_value = "l1")]
    penalty: String,
    /// Penalty weight.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Step schedule: constant, inv_sqrt_t, inv_sqrt_T, inv_sigma_t.
    #[arg(long, default_value = "constant")]
    schedule: String,
    /// Fixed step scale; selects single-run mode.
    #[arg(long, conflicts_with = "eta_grid")]
    eta: Option<f64>,
    /// Decade grid `lo..hi` (endpoints powers of ten) for sweep mode.
    /// Without --eta, sweep mode over 1e-10..1e2 is the default.
    #[arg(long = "eta-grid")]
    eta_grid: Option<String>,
    /// Strong-convexity constant for the inv_sigma_t schedule.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Pairwise feature correlation of the synthetic stream, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Stream dimension (synthetic, default 1000); with --data it overrides
    /// the inferred dimension instead.
    #[arg(long)]
    d: Option<usize>,
    /// Label-noise scale of the synthetic stream.
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    /// Number of steps (default 10000).
    #[arg(long = "T", conflicts_with = "wall_ms")]
    steps: Option<u64>,
    /// Wall-clock budget per run, in milliseconds.
    #[arg(long = "wall-ms")]
    wall_ms: Option<u64>,
    /// Base RNG seed; sweep cell k runs with seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sparse text dataset (`label index:value ...` per line, 1-based
    /// indices) used instead of the synthetic stream.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Prefix prepended verbatim to steps.csv, summary.csv, sweep.csv,
    /// best.csv.
    #[arg(long, default_value = "")]
    out: String,
}

fn parse_list<T: FromStr<Err = Error>>(raw: &str, flag: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if !part.is_empty() {
            out.push(part.parse()?);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("--{flag} names nothing")));
    }
    Ok(out)
}

fn build_config(cli: Cli) -> Result<BenchConfig> {
    let algos: Vec<Algo> = parse_list(&cli.algo, "algo")?;
    let solvers: Vec<SolverKind> = parse_list(&cli.solver, "solver")?;
    let loss = LossKind::from_str(&cli.loss)?;
    let penalty = match cli.penalty.as_str() {
        "none" => Penalty::None,
        "l1" => Penalty::L1 { lambda: cli.lambda },
        "l2" => Penalty::L2 { lambda: cli.lambda },
        other => return Err(Error::invalid(format!("unknown penalty '{other}'"))),
    };
    let schedule = ScheduleKind::from_str(&cli.schedule)?;
    let eta = match (cli.eta, &cli.eta_grid) {
        (Some(v), _) => EtaSpec::Fixed(v),
        (None, Some(spec)) => EtaSpec::Grid(parse_grid(spec)?),
        (None, None) => EtaSpec::Grid(parse_grid("1e-10..1e2")?),
    };
    let budget = match (cli.steps, cli.wall_ms) {
        (Some(t), _) => Budget::Steps(t),
        (None, Some(ms)) => Budget::WallMs(ms),
        (None, None) => Budget::Steps(10_000),
    };
    let cfg = BenchConfig {
        algos,
        solvers,
        loss,
        penalty,
        schedule,
        eta,
        sigma: cli.sigma,
        rho: cli.rho,
        d: cli.d,
        tau: cli.tau,
        budget,
        seed: cli.seed,
        data: cli.data,
        out: cli.out,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &BenchConfig) -> Result<()> {
    match &cfg.eta {
        EtaSpec::Fixed(_) => {
            let cell = runner::run_single(cfg)?;
            println!("{}", csv::SUMMARY_HEADER);
            println!("{}", cell.summary_row(cfg).to_line());
            eprintln!(
                "wrote {}steps.csv and {}summary.csv ({} steps{})",
                cfg.out,
                cfg.out,
                cell.record.rows.len(),
                if cell.diverged() { ", diverged" } else { "" },
            );
        }
        EtaSpec::Grid(_) => {
            let outcome = sweep::run_sweep(cfg)?;
            csv::write_summary(&cfg.out_path("sweep.csv"), &outcome.sweep_rows(cfg))?;
            let best = outcome.best_rows(cfg);
            csv::write_summary(&cfg.out_path("best.csv"), &best)?;
            println!("{}", csv::SUMMARY_HEADER);
            for row in &best {
                println!("{}", row.to_line());
            }
            eprintln!(
                "wrote {}sweep.csv ({} cells) and {}best.csv ({} rows)",
                cfg.out,
                outcome.cells.len(),
                cfg.out,
                best.len(),
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
