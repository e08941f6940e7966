//! Simulate, estimate and evaluate over a grid of one setting and a range
//! of seeds, producing one long-format CSV.

use std::fmt::Write as _;

use rayon::prelude::*;
use tvising::estimator::{estimate_path, Bandwidth, Penalty};
use tvising::generate_dataset;

use crate::error::{CliError, Result};
use crate::evaluate::{evaluate, TauMetrics};
use crate::io::Estimates;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    Lambda,
    H,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Self::N => "n",
            Self::Lambda => "lambda",
            Self::H => "h",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Self::N),
            "lambda" => Ok(Self::Lambda),
            "h" => Ok(Self::H),
            other => Err(CliError::input(format!("unknown sweep axis '{other}' (expected n|lambda|h)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value_index: usize,
    pub value: String,
    pub seed: u64,
    /// `None` when the whole cell failed before any query time was scored.
    pub tau: Option<f64>,
    pub metrics: Option<TauMetrics>,
    pub status: String,
}

/// Scenario for one axis value; `value` must already be validated.
fn cell_scenario(base: &Scenario, axis: Axis, value: f64, seed: u64) -> Scenario {
    let mut s = base.clone();
    s.seed = seed;
    match axis {
        Axis::N => s.n = value as usize,
        Axis::Lambda => s.lambda = Penalty::Fixed(value),
        Axis::H => s.bandwidth = Bandwidth::Fixed(value),
    }
    s
}

fn status_of(e: &CliError) -> String {
    let kind = match e {
        CliError::Input(_) => "input_error",
        CliError::Internal(_) => "internal_error",
    };
    // keep the CSV field free of separators and line breaks
    let msg: String = e.to_string().chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
    format!("{kind}: {msg}")
}

fn run_cell(base: &Scenario, axis: Axis, value_index: usize, value: f64, seed: u64) -> Vec<SweepRow> {
    let fail = |e: CliError| {
        vec![SweepRow {
            value_index,
            value: format_value(axis, value),
            seed,
            tau: None,
            metrics: None,
            status: status_of(&e),
        }]
    };
    let scenario = cell_scenario(base, axis, value, seed);
    let outcome = (|| -> Result<(Estimates, crate::scenario::Truth)> {
        scenario.validate()?;
        let path = scenario.path()?;
        let data = generate_dataset(&path, scenario.n, scenario.sampler, scenario.seed)?;
        let cfg = scenario.estimator_config();
        let entries = estimate_path(&data, &scenario.tau_grid, &cfg);
        Ok((Estimates::from_path(&data, &cfg, entries), scenario.truth()?))
    })();
    let (estimates, truth) = match outcome {
        Ok(x) => x,
        Err(e) => return fail(e),
    };

    let mut rows = Vec::new();
    for (k, tp) in truth.taus.iter().enumerate() {
        let row = match estimates.estimates.iter().find(|e| e.tau == tp.tau) {
            Some(est) => {
                let single = Estimates {
                    estimates: vec![est.clone()],
                    errors: Vec::new(),
                    ..estimates.clone()
                };
                let single_truth = crate::scenario::Truth {
                    taus: vec![truth.taus[k].clone()],
                    ..truth.clone()
                };
                match evaluate(&single, &single_truth) {
                    Ok(mut r) => SweepRow {
                        value_index,
                        value: format_value(axis, value),
                        seed,
                        tau: Some(tp.tau),
                        metrics: r.per_tau.pop(),
                        status: "ok".into(),
                    },
                    Err(e) => SweepRow {
                        value_index,
                        value: format_value(axis, value),
                        seed,
                        tau: Some(tp.tau),
                        metrics: None,
                        status: status_of(&e),
                    },
                }
            }
            None => {
                let err = estimates.errors.iter().find(|e| e.tau == tp.tau);
                let e = match err {
                    Some(e) if e.exit_code == 1 => CliError::Internal(e.message.clone()),
                    Some(e) => CliError::Input(e.message.clone()),
                    None => CliError::Internal("missing estimate".into()),
                };
                SweepRow {
                    value_index,
                    value: format_value(axis, value),
                    seed,
                    tau: Some(tp.tau),
                    metrics: None,
                    status: status_of(&e),
                }
            }
        };
        rows.push(row);
    }
    rows
}

fn format_value(axis: Axis, value: f64) -> String {
    match axis {
        Axis::N => format!("{}", value as usize),
        _ => format!("{value}"),
    }
}

fn check_values(axis: Axis, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(CliError::input("sweep needs at least one axis value"));
    }
    for &v in values {
        let ok = match axis {
            Axis::N => v >= 1.0 && v.fract() == 0.0 && v <= usize::MAX as f64,
            Axis::Lambda => v >= 0.0 && v.is_finite(),
            Axis::H => v > 0.0 && v.is_finite(),
        };
        if !ok {
            return Err(CliError::input(format!("invalid {} value {v}", axis.name())));
        }
    }
    Ok(())
}

/// Runs every (value, seed) cell with seeds `scenario.seed .. scenario.seed + seeds`.
/// Rows are ordered by value position, seed and query time.
pub fn run_sweep(base: &Scenario, axis: Axis, values: &[f64], seeds: u64) -> Result<Vec<SweepRow>> {
    check_values(axis, values)?;
    if seeds == 0 {
        return Err(CliError::input("sweep needs at least one seed"));
    }
    base.validate()?;
    let cells: Vec<(usize, f64, u64)> = values
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| (0..seeds).map(move |k| (i, v, base.seed.wrapping_add(k))))
        .collect();
    let mut rows: Vec<SweepRow> = cells
        .par_iter()
        .flat_map_iter(|&(i, v, seed)| run_cell(base, axis, i, v, seed))
        .collect();
    rows.sort_by(|a, b| {
        (a.value_index, a.seed)
            .cmp(&(b.value_index, b.seed))
            .then(a.tau.unwrap_or(-1.0).total_cmp(&b.tau.unwrap_or(-1.0)))
    });
    Ok(rows)
}

pub fn sweep_csv(axis: Axis, rows: &[SweepRow]) -> String {
    let mut out = String::from("axis,value,seed,tau,precision,recall,f1,signed_exact,estimated_edges,status\n");
    for r in rows {
        let tau = r.tau.map(|t| t.to_string()).unwrap_or_default();
        match &r.metrics {
            Some(m) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                axis.name(),
                r.value,
                r.seed,
                tau,
                m.precision,
                m.recall,
                m.f1,
                u8::from(m.signed_exact),
                m.estimated_edges,
                r.status
            ),
            None => writeln!(out, "{},{},{},{},,,,,,{}", axis.name(), r.value, r.seed, tau, r.status),
        }
        .unwrap();
    }
    out
}
