//! Domain types and the node-conditional likelihood of the pairwise binary
//! Markov random field
//!
//! ```text
//! P(x) = exp(sum_{u<v} theta_uv x_u x_v) / Z(theta),   x in {-1,+1}^p.
//! ```
//!
//! Spins are stored as `i8` with values in `{-1, +1}`. A [`NodeParameter`]
//! for node `u` holds `p - 1` couplings in skip-`u` order: slot `k` refers to
//! vertex `k` when `k < u` and to vertex `k + 1` otherwise.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of unordered pairs `(u, v)`, `u < v`, over `p` vertices.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Position of the unordered pair `{u, v}` in lexicographic order of `(min, max)`.
pub fn pair_index(p: usize, u: usize, v: usize) -> usize {
    debug_assert!(u != v && u < p && v < p);
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    // pairs (i, j) with i < a come first; row i holds p - 1 - i pairs
    a * (2 * p - a - 1) / 2 + (b - a - 1)
}

/// All unordered pairs in the order used by [`pair_index`].
pub fn pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |u| (u + 1..p).map(move |v| (u, v)))
}

fn check_vertex(vertex: usize, p: usize) -> Result<()> {
    if vertex >= p {
        return Err(Error::VertexOutOfRange { vertex, p });
    }
    Ok(())
}

fn check_spins(values: &[i8]) -> Result<()> {
    for (position, &value) in values.iter().enumerate() {
        if value != 1 && value != -1 {
            return Err(Error::InvalidSpin {
                value: value as i64,
                position,
            });
        }
    }
    Ok(())
}

/// One draw `x^t` of the spin vector together with its time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    values: Vec<i8>,
    time: f64,
}

impl Observation {
    pub fn new(values: Vec<i8>, time: f64) -> Result<Self> {
        check_spins(&values)?;
        if !(0.0..=1.0).contains(&time) {
            return Err(Error::InvalidArgument(format!(
                "observation time {time} outside [0, 1]"
            )));
        }
        Ok(Self { values, time })
    }

    /// Maps `{0, 1}` inputs to `{-1, +1}` (0 becomes -1).
    pub fn from_zero_one(values: &[u8], time: f64) -> Result<Self> {
        let mut spins = Vec::with_capacity(values.len());
        for (position, &value) in values.iter().enumerate() {
            match value {
                0 => spins.push(-1),
                1 => spins.push(1),
                _ => {
                    return Err(Error::InvalidSpin {
                        value: value as i64,
                        position,
                    })
                }
            }
        }
        Self::new(spins, time)
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// An ordered sample `D_n` of `n` observations in `{-1,+1}^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    observations: Vec<Observation>,
}

impl Dataset {
    /// Builds a dataset, checking shared dimension and strictly increasing times.
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        let first = observations
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset must contain at least one observation".into()))?;
        let p = first.dim();
        if p < 2 {
            return Err(Error::InvalidArgument(format!("dimension p = {p} must be at least 2")));
        }
        for obs in &observations {
            if obs.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: obs.dim(),
                });
            }
        }
        for (i, pair) in observations.windows(2).enumerate() {
            if pair[1].time <= pair[0].time {
                return Err(Error::InvalidArgument(format!(
                    "observation times must be strictly increasing (rows {} and {})",
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self { p, observations })
    }

    /// Assigns the equispaced time stamps `t_i = i / n`, `i = 1..=n`.
    pub fn equispaced(rows: Vec<Vec<i8>>) -> Result<Self> {
        let n = rows.len();
        let observations = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| Observation::new(values, equispaced_time(i, n)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(observations)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(Observation::time).collect()
    }
}

/// Time stamp of the `index`-th (zero-based) of `n` equispaced observations.
pub fn equispaced_time(index: usize, n: usize) -> f64 {
    (index + 1) as f64 / n as f64
}

/// The couplings `theta_u = {theta_uv : v != u}` of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeParameter {
    node: usize,
    theta: Vec<f64>,
}

impl NodeParameter {
    /// `theta` must have length `p - 1` and be laid out in skip-`node` order.
    pub fn new(node: usize, theta: Vec<f64>) -> Result<Self> {
        check_vertex(node, theta.len() + 1)?;
        if let Some(bad) = theta.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coupling value {bad}")));
        }
        Ok(Self { node, theta })
    }

    pub fn zeros(p: usize, node: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument(format!("dimension p = {p} must be at least 2")));
        }
        Self::new(node, vec![0.0; p - 1])
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn p(&self) -> usize {
        self.theta.len() + 1
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    /// Slot of vertex `v` in the skip-node layout, `None` for the node itself.
    pub fn slot_of(&self, v: usize) -> Option<usize> {
        slot_of(self.node, v)
    }

    /// Vertex addressed by slot `k`.
    pub fn vertex_of(&self, k: usize) -> usize {
        vertex_of(self.node, k)
    }

    /// `theta_uv`, zero for `v == u`.
    pub fn get(&self, v: usize) -> f64 {
        self.slot_of(v).map_or(0.0, |k| self.theta[k])
    }

    /// Vertices with a nonzero coupling.
    pub fn support(&self) -> Vec<usize> {
        self.theta
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != 0.0)
            .map(|(k, _)| self.vertex_of(k))
            .collect()
    }
}

pub(crate) fn slot_of(node: usize, v: usize) -> Option<usize> {
    match v.cmp(&node) {
        std::cmp::Ordering::Less => Some(v),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(v - 1),
    }
}

pub(crate) fn vertex_of(node: usize, k: usize) -> usize {
    if k < node {
        k
    } else {
        k + 1
    }
}

/// Full parameter vector `theta in R^{p choose 2}` indexed by [`pair_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    p: usize,
    values: Vec<f64>,
}

impl Couplings {
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != pair_count(p) {
            return Err(Error::DimensionMismatch {
                expected: pair_count(p),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coupling value {bad}")));
        }
        Ok(Self { p, values })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            values: vec![0.0; pair_count(p)],
        }
    }

    /// Builds couplings from `(u, v, value)` triples; unlisted pairs are zero.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut out = Self::zeros(p);
        for &(u, v, value) in edges {
            out.set(u, v, value)?;
        }
        Ok(out)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        if u == v {
            0.0
        } else {
            self.values[pair_index(self.p, u, v)]
        }
    }

    pub fn set(&mut self, u: usize, v: usize, value: f64) -> Result<()> {
        check_vertex(u, self.p)?;
        check_vertex(v, self.p)?;
        if u == v {
            return Err(Error::InvalidArgument(format!("self-loop ({u}, {u})")));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("coupling ({u}, {v}) = {value}")));
        }
        self.values[pair_index(self.p, u, v)] = value;
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            p: self.p,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Dense symmetric `p x p` matrix with zero diagonal, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; p * p];
        for (idx, (u, v)) in pairs(p).enumerate() {
            out[u * p + v] = self.values[idx];
            out[v * p + u] = self.values[idx];
        }
        out
    }

    /// The subvector `theta_u`.
    pub fn node_parameter(&self, u: usize) -> Result<NodeParameter> {
        check_vertex(u, self.p)?;
        let theta = (0..self.p).filter(|&v| v != u).map(|v| self.get(u, v)).collect();
        Ok(NodeParameter { node: u, theta })
    }

    pub fn graph(&self) -> Graph {
        Graph {
            p: self.p,
            edges: pairs(self.p)
                .zip(&self.values)
                .filter(|(_, &v)| v != 0.0)
                .map(|(e, _)| e)
                .collect(),
        }
    }

    pub fn signed_edges(&self) -> SignedEdgeVector {
        let mut out = SignedEdgeVector::empty(self.p);
        for ((u, v), &value) in pairs(self.p).zip(&self.values) {
            if value != 0.0 {
                out.entries.insert((u, v), if value > 0.0 { 1 } else { -1 });
            }
        }
        out
    }
}

/// Signed edge vector `SE^tau`: `sign(theta_uv)` on edges, 0 elsewhere.
///
/// Only nonzero entries are stored, keyed by the ordered pair `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedEdgeVector {
    p: usize,
    entries: BTreeMap<(usize, usize), i8>,
}

impl SignedEdgeVector {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            entries: BTreeMap::new(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Sets entry `{u, v}`; a sign of 0 removes the edge.
    pub fn set(&mut self, u: usize, v: usize, sign: i8) -> Result<()> {
        check_vertex(u, self.p)?;
        check_vertex(v, self.p)?;
        if u == v {
            return Err(Error::InvalidArgument(format!("self-loop ({u}, {u})")));
        }
        let key = (u.min(v), u.max(v));
        match sign {
            0 => {
                self.entries.remove(&key);
            }
            1 | -1 => {
                self.entries.insert(key, sign);
            }
            _ => return Err(Error::InvalidArgument(format!("edge sign {sign} not in {{-1, 0, 1}}"))),
        }
        Ok(())
    }

    pub fn get(&self, u: usize, v: usize) -> i8 {
        self.entries.get(&(u.min(v), u.max(v))).copied().unwrap_or(0)
    }

    /// Nonzero entries in pair order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), i8)> + '_ {
        self.entries.iter().map(|(&k, &s)| (k, s))
    }

    pub fn edge_count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dense `{-1, 0, +1}` vector in [`pair_index`] order.
    pub fn to_dense(&self) -> Vec<i8> {
        let mut out = vec![0; pair_count(self.p)];
        for (&(u, v), &s) in &self.entries {
            out[pair_index(self.p, u, v)] = s;
        }
        out
    }

    pub fn graph(&self) -> Graph {
        Graph {
            p: self.p,
            edges: self.entries.keys().copied().collect(),
        }
    }
}

/// Undirected simple graph on `p` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            check_vertex(u, p)?;
            check_vertex(v, p)?;
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop ({u}, {u})")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self { p, edges: set })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        (0..self.p).filter(|&v| v != u && self.contains(u, v)).collect()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == u || b == u).count()
    }

    /// Maximum vertex degree `s(G)`.
    pub fn max_degree(&self) -> usize {
        let mut degree = vec![0usize; self.p];
        for &(a, b) in &self.edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        degree.into_iter().max().unwrap_or(0)
    }
}

/// Local field `<theta_u, x_{\u}>` of node `u`.
pub fn local_field(theta_u: &NodeParameter, x: &Observation, u: usize) -> Result<f64> {
    if x.dim() != theta_u.p() {
        return Err(Error::DimensionMismatch {
            expected: theta_u.p(),
            found: x.dim(),
        });
    }
    if u != theta_u.node {
        return Err(Error::InvalidArgument(format!(
            "parameter belongs to node {}, not {u}",
            theta_u.node
        )));
    }
    let s = field_from_spins(&theta_u.theta, x.values(), u);
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("local field of node {u}")));
    }
    Ok(s)
}

pub(crate) fn field_from_spins(theta: &[f64], spins: &[i8], u: usize) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(k, &t)| t * spins[vertex_of(u, k)] as f64)
        .sum()
}

/// `P(x_u = +1 | x_{\u})` for local field `s`, i.e. `exp(2s) / (exp(2s) + 1)`.
pub fn spin_up_probability(s: f64) -> f64 {
    logistic(2.0 * s)
}

fn logistic(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `-gamma = log(exp(s) + exp(-s)) - y s` for response `y`, without overflow.
///
/// The `|s| - y s` part is formed first so that a vanishing loss is not
/// absorbed into `|s|`.
pub(crate) fn negative_logloss(y: f64, s: f64) -> f64 {
    let a = s.abs();
    (a - y * s) + (-2.0 * a).exp().ln_1p()
}

/// `sech^2(s)`, which is `4 exp(2 x_u s) / (exp(2 x_u s) + 1)^2` for either sign of `x_u`.
pub(crate) fn sech_squared(s: f64) -> f64 {
    let e = (-2.0 * s.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Probability of the observed spin `x_u` given the remaining spins.
pub fn conditional_prob(theta_u: &NodeParameter, x: &Observation, u: usize) -> Result<f64> {
    let s = local_field(theta_u, x, u)?;
    Ok(logistic(2.0 * x.values()[u] as f64 * s))
}

/// Node-conditional log-likelihood `gamma(theta_u; x)` of one observation.
pub fn logloss(theta_u: &NodeParameter, x: &Observation, u: usize) -> Result<f64> {
    let s = local_field(theta_u, x, u)?;
    Ok(-negative_logloss(x.values()[u] as f64, s))
}

/// Gradient of [`logloss`] with respect to `theta_u`: `x_{\u} (x_u - tanh s)`.
pub fn score(theta_u: &NodeParameter, x: &Observation, u: usize) -> Result<Vec<f64>> {
    let s = local_field(theta_u, x, u)?;
    let residual = x.values()[u] as f64 - s.tanh();
    Ok((0..theta_u.theta.len())
        .map(|k| x.values()[vertex_of(u, k)] as f64 * residual)
        .collect())
}

/// Variance function `eta(x; theta_u) = sech^2(<theta_u, x_{\u}>)`.
pub fn variance_fn(theta_u: &NodeParameter, x: &Observation, u: usize) -> Result<f64> {
    let s = local_field(theta_u, x, u)?;
    Ok(sech_squared(s))
}
