//! Compactly supported smoothing kernels and the normalized observation
//! weights `w_t = K((t - tau) / h) / sum_t' K((t' - tau) / h)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points whose scaled distance exceeds 1 by less than this are treated as
/// lying on the window edge, so that `|t - tau| = h` survives rounding.
const EDGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum KernelShape {
    #[default]
    #[serde(rename = "box")]
    Box,
    #[serde(rename = "tri", alias = "triangular")]
    Triangular,
    #[serde(rename = "epa", alias = "epanechnikov")]
    Epanechnikov,
}

impl FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Self::Box),
            "tri" | "triangular" => Ok(Self::Triangular),
            "epa" | "epanechnikov" => Ok(Self::Epanechnikov),
            other => Err(Error::InvalidArgument(format!(
                "unknown kernel '{other}' (expected box, tri or epa)"
            ))),
        }
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Box => "box",
            Self::Triangular => "tri",
            Self::Epanechnikov => "epa",
        })
    }
}

/// A symmetric nonnegative kernel supported on `[-1, 1]` together with a
/// bound `m_k >= 1` on `max |K|` and `max K^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub m_k: f64,
}

impl KernelSpec {
    /// All shipped kernels peak at or below 1, so `m_k = 1` certifies them.
    pub fn new(shape: KernelShape) -> Self {
        Self { shape, m_k: 1.0 }
    }

    pub fn eval(&self, z: f64) -> f64 {
        kernel_eval(self, z)
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::new(KernelShape::Box)
    }
}

pub fn kernel_eval(spec: &KernelSpec, z: f64) -> f64 {
    let a = z.abs();
    if a > 1.0 || a.is_nan() {
        return 0.0;
    }
    match spec.shape {
        KernelShape::Box => 0.5,
        KernelShape::Triangular => 1.0 - a,
        KernelShape::Epanechnikov => 0.75 * (1.0 - a * a),
    }
}

/// Normalized kernel weights of every observation for a query time.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    tau: f64,
    h: f64,
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(index, weight)` for observations inside the window.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, w)| w > 0.0)
    }

    /// Kish effective sample size `1 / sum w_i^2`.
    pub fn effective_n(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

pub fn weights(spec: &KernelSpec, h: f64, times: &[f64], tau: f64) -> Result<WeightVector> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth h = {h} must be positive and finite")));
    }
    if times.is_empty() {
        return Err(Error::InvalidArgument("no observation times".into()));
    }
    if !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("query time {tau} is not finite")));
    }
    let raw: Vec<f64> = times
        .iter()
        .map(|&t| {
            let z = (t - tau) / h;
            let z = if z.abs() <= 1.0 + EDGE_SLACK { z.clamp(-1.0, 1.0) } else { z };
            kernel_eval(spec, z)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyWindow { tau, h });
    }
    Ok(WeightVector {
        tau,
        h,
        weights: raw.into_iter().map(|k| k / total).collect(),
    })
}

/// `c * n^{-1/3}`, raised if needed so that a one-sided window over the
/// equispaced grid `i / n` still holds at least `max(10, 2 ln n)` points.
pub fn bandwidth_default(n: usize, c: f64) -> f64 {
    let n = n.max(1);
    let nominal = c * (n as f64).powf(-1.0 / 3.0);
    let min_points = (2.0 * (n as f64).ln()).ceil().max(10.0) as usize;
    let floor = min_points.min(n) as f64 / n as f64;
    nominal.max(floor)
}
