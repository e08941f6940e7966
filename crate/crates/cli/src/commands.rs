//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tvising::diagnostics::{check_assumptions, deviation_report, Deviations, DiagnosticsReport};
use tvising::estimator::{estimate_path, Bandwidth, Combine, EstimatorConfig, Penalty};
use tvising::kernel::{KernelShape, KernelSpec};
use tvising::sampler::path_value;
use tvising::{generate_dataset, SolveConfig};

use crate::error::{CliError, Result};
use crate::evaluate::{evaluate, metrics_csv};
use crate::io::{dataset_from_csv, dataset_to_csv, parse_json, read_text, to_json, write_text, Estimates};
use crate::scenario::{Scenario, Truth};
use crate::sweep::{run_sweep, sweep_csv, Axis};

#[derive(Debug, Parser)]
#[command(name = "tvising", version, about = "Time-varying Ising model structure estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a scenario and write it with its ground truth.
    Simulate(SimulateArgs),
    /// Estimate signed graphs at one or more query times.
    Estimate(EstimateArgs),
    /// Report dependency and incoherence quantities for a scenario.
    Diagnose(DiagnoseArgs),
    /// Score estimates against a truth file.
    Evaluate(EvaluateArgs),
    /// Repeat simulate, estimate and evaluate over a grid of one setting.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Dataset CSV output.
    #[arg(long)]
    pub data: PathBuf,
    /// Ground-truth JSON output.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// A single time in [0, 1] or `grid:start:stop:count`.
    #[arg(long)]
    pub tau: String,
    #[arg(long, default_value = "box")]
    pub kernel: String,
    #[arg(long, conflicts_with = "bandwidth_auto")]
    pub bandwidth: Option<f64>,
    /// Constant c in h = c n^(-1/3).
    #[arg(long)]
    pub bandwidth_auto: Option<f64>,
    #[arg(long, conflicts_with = "lambda_auto")]
    pub lambda: Option<f64>,
    /// Constant C in lambda = C sqrt(ln p) / n^(1/3).
    #[arg(long)]
    pub lambda_auto: Option<f64>,
    #[arg(long, default_value = "and")]
    pub combine: String,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Read spins as {0,1} instead of {-1,1}.
    #[arg(long)]
    pub zero_one: bool,
    /// Start each node solve from its solution at the previous query time.
    #[arg(long)]
    pub warm_start: bool,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Dataset for the sample-versus-population deviations.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub zero_one: bool,
    /// Query times; defaults to the scenario's grid.
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub estimates: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Result JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-time metrics CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// One of n, lambda, h.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub values: Vec<f64>,
    /// Seeds used per value, counting up from the scenario seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Long-format CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `v` or `grid:start:stop:count` (inclusive, equally spaced).
pub fn parse_taus(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::input(format!("invalid --tau '{spec}' (expected a number or grid:start:stop:count)"));
    let taus = if let Some(rest) = spec.strip_prefix("grid:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        match count {
            0 => return Err(bad()),
            1 => vec![start],
            _ => (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    } else {
        vec![spec.parse().map_err(|_| bad())?]
    };
    if let Some(t) = taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CliError::input(format!("query time {t} outside [0, 1]")));
    }
    Ok(taus)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::from_json(&read_text(path)?)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let path = scenario.path()?;
    let data = generate_dataset(&path, scenario.n, scenario.sampler, scenario.seed)?;
    let truth = scenario.truth()?;
    write_text(&args.data, &dataset_to_csv(&data))?;
    write_text(&args.truth, &to_json(&truth))
}

impl EstimateArgs {
    pub fn config(&self) -> Result<EstimatorConfig> {
        let shape: KernelShape = self.kernel.parse().map_err(|e: tvising::Error| CliError::input(e.to_string()))?;
        let combine: Combine = self.combine.parse().map_err(|e: tvising::Error| CliError::input(e.to_string()))?;
        let defaults = SolveConfig::default();
        let cfg = EstimatorConfig {
            kernel: KernelSpec::new(shape),
            bandwidth: match self.bandwidth {
                Some(h) => Bandwidth::Fixed(h),
                None => Bandwidth::Auto(self.bandwidth_auto.unwrap_or(1.0)),
            },
            lambda: match self.lambda {
                Some(l) => Penalty::Fixed(l),
                None => Penalty::Auto(self.lambda_auto.unwrap_or(1.0)),
            },
            solve: SolveConfig {
                tol: self.tol.unwrap_or(defaults.tol),
                max_iter: self.max_iter.unwrap_or(defaults.max_iter),
                ..defaults
            },
            combine,
            warm_start: self.warm_start,
        };
        cfg.solve.validate()?;
        Ok(cfg)
    }
}

/// Writes the estimates (including per-time errors) and returns the exit
/// code implied by those errors.
pub fn estimate(args: &EstimateArgs) -> Result<i32> {
    let cfg = args.config()?;
    let taus = parse_taus(&args.tau)?;
    let data = dataset_from_csv(&read_text(&args.data)?, args.zero_one)?;
    cfg.bandwidth.resolve(data.n())?;
    cfg.lambda.resolve(data.n(), data.p())?;
    let entries = estimate_path(&data, &taus, &cfg);
    let estimates = Estimates::from_path(&data, &cfg, entries);
    emit(args.out.as_deref(), &to_json(&estimates))?;
    for e in &estimates.errors {
        eprintln!("error: tau = {}: {}", e.tau, e.message);
    }
    Ok(estimates.exit_code())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauDiagnostics {
    pub tau: f64,
    pub nodes: Vec<DiagnosticsReport>,
    /// Present when a dataset was supplied.
    pub deviations: Option<Deviations>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub p: usize,
    pub h: Option<f64>,
    pub taus: Vec<TauDiagnostics>,
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let scenario = load_scenario(&args.scenario)?;
    let path = scenario.path()?;
    let taus = match &args.tau {
        Some(s) => parse_taus(s)?,
        None => scenario.tau_grid.clone(),
    };
    let data = match &args.data {
        Some(p) => Some(dataset_from_csv(&read_text(p)?, args.zero_one)?),
        None => None,
    };
    let cfg = scenario.estimator_config();
    let h = match &data {
        Some(d) => Some(cfg.bandwidth.resolve(d.n())?),
        None => None,
    };
    let mut report = DiagnoseReport {
        p: scenario.p,
        h,
        taus: Vec::with_capacity(taus.len()),
    };
    for tau in taus {
        let theta = path_value(&path, tau)?;
        let nodes = (0..scenario.p)
            .map(|u| check_assumptions(&theta, u))
            .collect::<tvising::Result<Vec<_>>>()?;
        let deviations = match &data {
            Some(d) => Some(deviation_report(d, &path, tau, &cfg)?),
            None => None,
        };
        report.taus.push(TauDiagnostics { tau, nodes, deviations });
    }
    emit(args.out.as_deref(), &to_json(&report))
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let estimates: Estimates = parse_json(&read_text(&args.estimates)?, "estimates")?;
    let truth: Truth = parse_json(&read_text(&args.truth)?, "truth")?;
    let result = evaluate(&estimates, &truth)?;
    if let Some(path) = &args.csv {
        write_text(path, &metrics_csv(&result))?;
    }
    emit(args.out.as_deref(), &to_json(&result))
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let axis: Axis = args.axis.parse()?;
    let scenario = load_scenario(&args.scenario)?;
    let rows = run_sweep(&scenario, axis, &args.values, args.seeds)?;
    emit(args.out.as_deref(), &sweep_csv(axis, &rows))
}

/// Worker count from `TVISING_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var("TVISING_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::input(format!("TVISING_THREADS must be a positive integer, got '{s}'"))),
        },
        Err(_) => Ok(None),
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate(a) => simulate(a).map(|()| 0),
        Command::Estimate(a) => estimate(a),
        Command::Diagnose(a) => diagnose(a).map(|()| 0),
        Command::Evaluate(a) => evaluate_cmd(a).map(|()| 0),
        Command::Sweep(a) => sweep(a).map(|()| 0),
    }
}

/// Runs a parsed command in a worker pool sized by `TVISING_THREADS` and
/// returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = thread_limit().and_then(|limit| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = limit {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Internal(format!("cannot start worker pool: {e}")))?;
        pool.install(|| dispatch(cli))
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
