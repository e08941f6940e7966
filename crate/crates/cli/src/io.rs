//! Dataset CSV and estimates JSON formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tvising::estimator::{EdgeEstimate, PathEntry, SolverStats};
use tvising::{Dataset, Observation};

use crate::error::{CliError, Result};

/// Renders a dataset as `t,x1,...,xp` with spins written as -1/1.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::from("t");
    for j in 1..=data.p() {
        write!(out, ",x{j}").unwrap();
    }
    out.push('\n');
    for obs in data.observations() {
        write!(out, "{}", obs.time()).unwrap();
        for &x in obs.values() {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a `t,x1,...,xp` dataset. With `zero_one`, spins are read from
/// {0,1} and mapped to {-1,+1}. Errors carry the 1-based file line.
pub fn dataset_from_csv(text: &str, zero_one: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("line 1: unreadable header: {e}")))?
        .clone();
    if headers.len() < 3 || &headers[0] != "t" {
        return Err(CliError::input("line 1: header must be t,x1,...,xp with p >= 2"));
    }
    let p = headers.len() - 1;
    let mut observations = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |pos| pos.line());
            CliError::input(format!("line {line}: malformed row: {e}"))
        })?;
        let line = record.position().map_or(0, |pos| pos.line());
        let time: f64 = record[0]
            .parse()
            .map_err(|_| CliError::input(format!("line {line}: time '{}' is not a number", &record[0])))?;
        let mut spins = Vec::with_capacity(p);
        for (j, field) in record.iter().skip(1).enumerate() {
            let value: i64 = field.parse().map_err(|_| {
                CliError::input(format!("line {line}, column x{}: '{field}' is not a binary value", j + 1))
            })?;
            let spin = match (zero_one, value) {
                (false, -1) | (true, 0) => -1,
                (_, 1) => 1,
                _ => {
                    let allowed = if zero_one { "{0,1}" } else { "{-1,1}" };
                    return Err(CliError::input(format!(
                        "line {line}, column x{}: value {value} not in {allowed}",
                        j + 1
                    )));
                }
            };
            spins.push(spin);
        }
        let obs = Observation::new(spins, time).map_err(|e| CliError::input(format!("line {line}: {e}")))?;
        observations.push(obs);
    }
    if observations.is_empty() {
        return Err(CliError::input("dataset has no rows"));
    }
    Dataset::new(observations).map_err(|e| CliError::input(format!("invalid dataset: {e}")))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        CliError::Internal(m) => CliError::Internal(format!("{}: {m}", path.display())),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// Parses JSON into `T`, naming the offending field path on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::input(format!("invalid {what} at '{}': {}", e.path(), e.inner())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau: f64,
    pub edges: Vec<EdgeEstimate>,
    pub conflicts: usize,
    pub solver_stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauError {
    pub tau: f64,
    pub message: String,
    pub exit_code: i32,
}

/// Output of `estimate`: one entry per query time that succeeded and one
/// error per query time that did not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub p: usize,
    pub n: usize,
    pub kernel: String,
    pub h: Option<f64>,
    pub lambda: Option<f64>,
    pub combine: tvising::Combine,
    pub estimates: Vec<TauEstimate>,
    #[serde(default)]
    pub errors: Vec<TauError>,
}

impl Estimates {
    pub fn from_path(data: &Dataset, cfg: &tvising::EstimatorConfig, entries: Vec<PathEntry>) -> Self {
        let mut estimates = Vec::new();
        let mut errors = Vec::new();
        for entry in entries {
            match entry.estimate {
                Ok(g) => estimates.push(TauEstimate {
                    tau: entry.tau,
                    edges: g.details,
                    conflicts: g.conflicts,
                    solver_stats: g.stats,
                }),
                Err(e) => {
                    let code = CliError::from(e.clone()).exit_code();
                    errors.push(TauError {
                        tau: entry.tau,
                        message: e.to_string(),
                        exit_code: code,
                    })
                }
            }
        }
        Self {
            p: data.p(),
            n: data.n(),
            kernel: cfg.kernel.shape.to_string(),
            h: cfg.bandwidth.resolve(data.n()).ok(),
            lambda: cfg.lambda.resolve(data.n(), data.p()).ok(),
            combine: cfg.combine,
            estimates,
            errors,
        }
    }

    /// Exit code implied by per-time errors: 0 if none, 1 if any is internal,
    /// else 2.
    pub fn exit_code(&self) -> i32 {
        self.errors.iter().map(|e| e.exit_code).fold(0, |acc, c| match (acc, c) {
            (1, _) | (_, 1) => 1,
            (a, c) => a.max(c),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let data = Dataset::equispaced(vec![vec![1, -1, 1], vec![-1, -1, 1], vec![1, 1, -1]]).unwrap();
        let text = dataset_to_csv(&data);
        assert!(text.starts_with("t,x1,x2,x3\n"));
        let back = dataset_from_csv(&text, false).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn zero_one_mapping() {
        let text = "t,x1,x2\n0.5,0,1\n1,1,1\n";
        let data = dataset_from_csv(text, true).unwrap();
        assert_eq!(data.observations()[0].values(), &[-1, 1]);
        let err = dataset_from_csv(text, false).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("x1"), "{err}");
    }

    #[test]
    fn errors_report_line_numbers() {
        let err = dataset_from_csv("t,x1,x2\n0.5,1,1\n0.7,1\n", false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 3"), "{err}");

        let err = dataset_from_csv("t,x1,x2\n0.5,1,1\n0.7,1,2\n", false).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("x2"), "{err}");

        let err = dataset_from_csv("t,x1,x2\n0.5,1,1\nabc,1,1\n", false).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        assert!(dataset_from_csv("time,x1,x2\n0.5,1,1\n", false).is_err());
        assert!(dataset_from_csv("t,x1,x2\n", false).is_err());
        assert!(dataset_from_csv("t,x1,x2\n0.5,1,1\n0.4,1,1\n", false).is_err());
    }

    #[test]
    fn exit_code_aggregation() {
        let mut e = Estimates {
            p: 2,
            n: 1,
            kernel: "box".into(),
            h: None,
            lambda: None,
            combine: tvising::Combine::And,
            estimates: vec![],
            errors: vec![],
        };
        assert_eq!(e.exit_code(), 0);
        e.errors.push(TauError { tau: 0.1, message: String::new(), exit_code: 2 });
        assert_eq!(e.exit_code(), 2);
        e.errors.push(TauError { tau: 0.2, message: String::new(), exit_code: 1 });
        assert_eq!(e.exit_code(), 1);
    }
}
