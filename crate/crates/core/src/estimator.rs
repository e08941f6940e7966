//! Signed graph estimation at a query time: one penalized node regression
//! per vertex, then a combination of the signed neighborhoods into a
//! symmetric signed edge vector.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{bandwidth_default, weights, KernelSpec, WeightVector};
use crate::model::{Dataset, NodeParameter, SignedEdgeVector};
use crate::optimizer::{lambda_default, NodeProblem, SolveConfig, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Constant `c` of [`bandwidth_default`].
    Auto(f64),
}

impl Bandwidth {
    pub fn resolve(&self, n: usize) -> Result<f64> {
        let h = match *self {
            Self::Fixed(h) => h,
            Self::Auto(c) => {
                if !(c > 0.0) {
                    return Err(Error::InvalidArgument(format!("bandwidth constant {c} must be > 0")));
                }
                bandwidth_default(n, c)
            }
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth h = {h} must be positive and finite")));
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    Fixed(f64),
    /// Constant `C` of [`lambda_default`].
    Auto(f64),
}

impl Penalty {
    pub fn resolve(&self, n: usize, p: usize) -> Result<f64> {
        let lambda = match *self {
            Self::Fixed(l) => l,
            Self::Auto(c) => {
                if !(c > 0.0) {
                    return Err(Error::InvalidArgument(format!("penalty constant {c} must be > 0")));
                }
                lambda_default(n.max(2), p as f64, c)
            }
        };
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} must be finite and >= 0")));
        }
        Ok(lambda)
    }
}

/// How per-node neighborhoods are merged into one undirected graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// Edge kept only if both endpoints select each other with the same sign.
    #[default]
    And,
    /// Edge kept if either endpoint selects the other.
    Or,
}

impl std::str::FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(Self::And),
            "or" => Ok(Self::Or),
            other => Err(Error::InvalidArgument(format!("unknown combine rule '{other}' (expected and|or)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kernel: KernelSpec,
    pub bandwidth: Bandwidth,
    pub lambda: Penalty,
    /// Solver settings; its `lambda` field is replaced by the resolved penalty.
    pub solve: SolveConfig,
    pub combine: Combine,
    /// Start each node solve at the previous query time's solution in [`estimate_path`].
    pub warm_start: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default(),
            bandwidth: Bandwidth::Auto(1.0),
            lambda: Penalty::Auto(1.0),
            solve: SolveConfig::default(),
            combine: Combine::And,
            warm_start: false,
        }
    }
}

impl EstimatorConfig {
    fn solve_config(&self, data: &Dataset) -> Result<SolveConfig> {
        Ok(SolveConfig {
            lambda: self.lambda.resolve(data.n(), data.p())?,
            ..self.solve
        })
    }

    pub fn weights(&self, data: &Dataset, tau: f64) -> Result<WeightVector> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!("query time {tau} outside [0, 1]")));
        }
        let h = self.bandwidth.resolve(data.n())?;
        weights(&self.kernel, h, &data.times(), tau)
    }
}

/// Estimated signed neighbors `v -> sign(theta_hat_uv)` of one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedNeighborhood {
    pub node: usize,
    pub entries: BTreeMap<usize, i8>,
}

impl SignedNeighborhood {
    pub fn from_parameter(theta: &NodeParameter) -> Self {
        let entries = theta
            .theta()
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != 0.0)
            .map(|(k, &t)| (theta.vertex_of(k), if t > 0.0 { 1 } else { -1 }))
            .collect();
        Self {
            node: theta.node(),
            entries,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Result of one certified node solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub neighborhood: SignedNeighborhood,
    pub result: SolveResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub u: usize,
    pub v: usize,
    pub sign: i8,
    /// `theta_hat_uv` from node `u`'s regression.
    pub theta_uv_u: f64,
    /// `theta_hat_vu` from node `v`'s regression.
    pub theta_uv_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub solves: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEstimate {
    pub tau: f64,
    pub h: f64,
    pub lambda: f64,
    pub edges: SignedEdgeVector,
    pub details: Vec<EdgeEstimate>,
    /// Pairs whose two node regressions disagree on the sign.
    pub conflicts: usize,
    pub stats: SolverStats,
}

fn fit_problem(problem: &NodeProblem, cfg: &SolveConfig, init: Option<&[f64]>) -> Result<NodeFit> {
    let result = problem.solve(cfg, init)?;
    if !result.converged {
        return Err(Error::NotConverged {
            node: problem.node(),
            iterations: result.iterations,
            kkt_residual: result.kkt_residual,
        });
    }
    Ok(NodeFit {
        neighborhood: SignedNeighborhood::from_parameter(&result.theta_hat),
        result,
    })
}

/// Solves node `u`'s penalized problem at `tau` and keeps the solver output.
pub fn fit_node(data: &Dataset, tau: f64, u: usize, cfg: &EstimatorConfig) -> Result<NodeFit> {
    let w = cfg.weights(data, tau)?;
    let problem = NodeProblem::new(data, &w, u)?;
    fit_problem(&problem, &cfg.solve_config(data)?, None)
}

pub fn estimate_neighborhood(data: &Dataset, tau: f64, u: usize, cfg: &EstimatorConfig) -> Result<SignedNeighborhood> {
    Ok(fit_node(data, tau, u, cfg)?.neighborhood)
}

/// Merges per-node parameters (one per vertex, in vertex order) into a
/// signed edge vector. Returns the edges, their per-node estimates and the
/// number of sign conflicts.
pub fn combine_neighborhoods(thetas: &[NodeParameter], rule: Combine) -> Result<(SignedEdgeVector, Vec<EdgeEstimate>, usize)> {
    let p = thetas.len();
    for (u, t) in thetas.iter().enumerate() {
        if t.node() != u || t.p() != p {
            return Err(Error::InvalidArgument(format!(
                "parameter {u} has node {} and dimension {}, expected node {u} and dimension {p}",
                t.node(),
                t.p()
            )));
        }
    }
    let mut edges = SignedEdgeVector::empty(p);
    let mut details = Vec::new();
    let mut conflicts = 0;
    for u in 0..p {
        for v in u + 1..p {
            let a = thetas[u].get(v);
            let b = thetas[v].get(u);
            let (sa, sb) = (sign_of(a), sign_of(b));
            if sa != 0 && sb != 0 && sa != sb {
                conflicts += 1;
            }
            let sign = match rule {
                Combine::And => {
                    if sa != 0 && sa == sb {
                        sa
                    } else {
                        0
                    }
                }
                Combine::Or => {
                    // larger magnitude decides; ties go to the lower node index
                    if a.abs() >= b.abs() {
                        sa
                    } else {
                        sb
                    }
                }
            };
            if sign != 0 {
                edges.set(u, v, sign)?;
                details.push(EdgeEstimate {
                    u,
                    v,
                    sign,
                    theta_uv_u: a,
                    theta_uv_v: b,
                });
            }
        }
    }
    Ok((edges, details, conflicts))
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn assemble(tau: f64, h: f64, lambda: f64, fits: Vec<NodeFit>, rule: Combine) -> Result<GraphEstimate> {
    let mut stats = SolverStats::default();
    for f in &fits {
        stats.solves += 1;
        stats.total_iterations += f.result.iterations;
        stats.max_iterations = stats.max_iterations.max(f.result.iterations);
        stats.max_kkt_residual = stats.max_kkt_residual.max(f.result.kkt_residual);
    }
    let thetas: Vec<NodeParameter> = fits.into_iter().map(|f| f.result.theta_hat).collect();
    let (edges, details, conflicts) = combine_neighborhoods(&thetas, rule)?;
    Ok(GraphEstimate {
        tau,
        h,
        lambda,
        edges,
        details,
        conflicts,
        stats,
    })
}

/// Estimates the signed graph at `tau`; node problems are solved in parallel
/// and merged in vertex order.
pub fn estimate_graph(data: &Dataset, tau: f64, cfg: &EstimatorConfig) -> Result<GraphEstimate> {
    let w = cfg.weights(data, tau)?;
    let solve = cfg.solve_config(data)?;
    let fits = (0..data.p())
        .into_par_iter()
        .map(|u| fit_problem(&NodeProblem::new(data, &w, u)?, &solve, None))
        .collect::<Result<Vec<_>>>()?;
    assemble(tau, w.h(), solve.lambda, fits, cfg.combine)
}

/// Estimate at one query time of a path; failures are kept per time point.
#[derive(Debug, Clone)]
pub struct PathEntry {
    pub tau: f64,
    pub estimate: Result<GraphEstimate>,
}

/// Estimates the graph at every `tau`. Errors at one time point do not
/// affect the others. With `warm_start`, each node's solve starts from its
/// solution at the previous query time.
pub fn estimate_path(data: &Dataset, taus: &[f64], cfg: &EstimatorConfig) -> Vec<PathEntry> {
    if !cfg.warm_start {
        return taus
            .par_iter()
            .map(|&tau| PathEntry {
                tau,
                estimate: estimate_graph(data, tau, cfg),
            })
            .collect();
    }

    let setup = cfg.solve_config(data);
    let windows: Vec<Result<WeightVector>> = taus.iter().map(|&tau| cfg.weights(data, tau)).collect();
    // fits[u][k]: node u at taus[k]
    let fits: Vec<Vec<Result<NodeFit>>> = (0..data.p())
        .into_par_iter()
        .map(|u| {
            let mut previous: Option<Vec<f64>> = None;
            windows
                .iter()
                .map(|w| {
                    let solve = setup.clone()?;
                    let w = w.clone()?;
                    let problem = NodeProblem::new(data, &w, u)?;
                    let fit = fit_problem(&problem, &solve, previous.as_deref());
                    if let Ok(f) = &fit {
                        previous = Some(f.result.theta_hat.theta().to_vec());
                    }
                    fit
                })
                .collect()
        })
        .collect();

    let mut per_node: Vec<std::vec::IntoIter<Result<NodeFit>>> = fits.into_iter().map(Vec::into_iter).collect();
    taus.iter()
        .zip(windows)
        .map(|(&tau, w)| {
            let node_fits: Result<Vec<NodeFit>> = per_node
                .iter_mut()
                .map(|it| it.next().expect("one fit per tau"))
                .collect();
            let estimate = w.and_then(|w| {
                let lambda = setup.clone()?.lambda;
                assemble(tau, w.h(), lambda, node_fits?, cfg.combine)
            });
            PathEntry { tau, estimate }
        })
        .collect()
}
