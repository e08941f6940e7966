//! Simulation scenarios and the ground truth they imply.

use serde::{Deserialize, Serialize};
use tvising::estimator::{Bandwidth, Combine, EstimatorConfig, Penalty};
use tvising::kernel::{KernelShape, KernelSpec};
use tvising::sampler::{path_value, EdgePath, ParameterPath, SamplerMethod};
use tvising::SolveConfig;

use crate::error::{CliError, Result};

/// Points used to search a kernel window for nonzero couplings.
const BAND_SCAN_POINTS: usize = 401;

fn default_bandwidth() -> Bandwidth {
    Bandwidth::Auto(1.0)
}

fn default_lambda() -> Penalty {
    Penalty::Auto(1.0)
}

pub fn default_tau_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn default_theta_min_eval() -> f64 {
    0.1
}

fn default_tol() -> f64 {
    SolveConfig::default().tol
}

fn default_max_iter() -> usize {
    SolveConfig::default().max_iter
}

/// Everything needed to reproduce a simulate/estimate/evaluate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerMethod,
    pub edges: Vec<EdgePath>,
    /// Declared bound on first and second coupling derivatives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness_bound: Option<f64>,
    #[serde(default)]
    pub kernel: KernelShape,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: Bandwidth,
    #[serde(default = "default_lambda")]
    pub lambda: Penalty,
    #[serde(default)]
    pub combine: Combine,
    #[serde(default = "default_tau_grid")]
    pub tau_grid: Vec<f64>,
    /// Couplings weaker than this at a query time are not scored.
    #[serde(default = "default_theta_min_eval")]
    pub theta_min_eval: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::input(format!("invalid scenario at '{}': {}", e.path(), e.inner())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(CliError::input(format!("invalid scenario at 'p': p = {} must be at least 2", self.p)));
        }
        if self.n == 0 {
            return Err(CliError::input("invalid scenario at 'n': n must be at least 1"));
        }
        if self.tau_grid.is_empty() {
            return Err(CliError::input("invalid scenario at 'tau_grid': grid is empty"));
        }
        if let Some(t) = self.tau_grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(CliError::input(format!("invalid scenario at 'tau_grid': {t} outside [0, 1]")));
        }
        if !(self.theta_min_eval >= 0.0) {
            return Err(CliError::input("invalid scenario at 'theta_min_eval': must be >= 0"));
        }
        self.path().map_err(|e| CliError::input(format!("invalid scenario at 'edges': {e}")))?;
        self.bandwidth
            .resolve(self.n)
            .map_err(|e| CliError::input(format!("invalid scenario at 'bandwidth': {e}")))?;
        self.lambda
            .resolve(self.n, self.p)
            .map_err(|e| CliError::input(format!("invalid scenario at 'lambda': {e}")))?;
        Ok(())
    }

    pub fn path(&self) -> tvising::Result<ParameterPath> {
        ParameterPath::new(self.p, self.edges.clone(), self.smoothness_bound)
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            kernel: KernelSpec::new(self.kernel),
            bandwidth: self.bandwidth,
            lambda: self.lambda,
            solve: SolveConfig {
                tol: self.tol,
                max_iter: self.max_iter,
                ..SolveConfig::default()
            },
            combine: self.combine,
            warm_start: false,
        }
    }

    /// Bandwidth resolved for this scenario's `n`.
    pub fn resolved_bandwidth(&self) -> Result<f64> {
        Ok(self.bandwidth.resolve(self.n)?)
    }

    pub fn truth(&self) -> Result<Truth> {
        let path = self.path()?;
        let h = self.resolved_bandwidth()?;
        let taus = self
            .tau_grid
            .iter()
            .map(|&tau| truth_at(&path, tau, h, self.theta_min_eval))
            .collect::<Result<Vec<_>>>()?;
        Ok(Truth {
            p: self.p,
            n: self.n,
            seed: self.seed,
            theta_min_eval: self.theta_min_eval,
            h,
            taus,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairValue {
    pub u: usize,
    pub v: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedEdge {
    pub u: usize,
    pub v: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPoint {
    pub tau: f64,
    /// Every path coupling evaluated at `tau`.
    pub theta: Vec<PairValue>,
    /// Scored edges: `|theta| >= theta_min_eval`.
    pub edges: Vec<SignedEdge>,
    /// Unscored pairs: weak at `tau` but nonzero somewhere in its window.
    pub band: Vec<PairValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub theta_min_eval: f64,
    /// Bandwidth used to define the evaluation band.
    pub h: f64,
    pub taus: Vec<TruthPoint>,
}

/// Classifies every path edge at `tau` as a true edge, an unscored band
/// pair, or absent (identically zero over `[tau - h, tau + h]`).
pub fn truth_at(path: &ParameterPath, tau: f64, h: f64, theta_min_eval: f64) -> Result<TruthPoint> {
    let theta = path_value(path, tau)?;
    let lo = (tau - h).max(0.0);
    let hi = (tau + h).min(1.0);
    let mut point = TruthPoint {
        tau,
        theta: Vec::new(),
        edges: Vec::new(),
        band: Vec::new(),
    };
    let mut edges: Vec<&EdgePath> = path.edges().iter().collect();
    edges.sort_by_key(|e| (e.u.min(e.v), e.u.max(e.v)));
    for e in edges {
        let (u, v) = (e.u.min(e.v), e.u.max(e.v));
        let value = theta.get(u, v);
        point.theta.push(PairValue { u, v, value });
        if value.abs() >= theta_min_eval && value != 0.0 {
            point.edges.push(SignedEdge {
                u,
                v,
                sign: if value > 0.0 { 1 } else { -1 },
            });
        } else {
            let active_nearby = value != 0.0
                || (0..BAND_SCAN_POINTS).any(|i| {
                    let t = lo + (hi - lo) * i as f64 / (BAND_SCAN_POINTS - 1) as f64;
                    e.preset.value(t) != 0.0
                });
            if active_nearby {
                point.band.push(PairValue { u, v, value });
            }
        }
    }
    Ok(point)
}
