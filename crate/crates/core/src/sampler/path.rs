//! Smooth coupling trajectories `t -> theta_uv(t)` on `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Couplings, Graph};

/// `max |S'|` of the quintic smoothstep `S(x) = 6x^5 - 15x^4 + 10x^3`.
const SMOOTHSTEP_D1: f64 = 1.875;
/// `max |S''|`, attained at `x = 1/2 -+ sqrt(3)/6`.
const SMOOTHSTEP_D2: f64 = 5.773_502_691_896_258;
const DEGREE_GRID: usize = 1001;

/// Concrete twice-differentiable coupling profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathPreset {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(2 pi t / period + phase)`.
    Sine {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Moves from `from` to `to` across `[center - width/2, center + width/2]`
    /// along a quintic smoothstep; constant (C^2 joined) outside that interval.
    SmoothSwitch {
        from: f64,
        to: f64,
        center: f64,
        width: f64,
    },
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

impl PathPreset {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("path parameter {name} = {v} is not finite")))
            }
        };
        match *self {
            Self::Constant { value } => finite("value", value),
            Self::Sine {
                amplitude,
                period,
                phase,
                offset,
            } => {
                finite("amplitude", amplitude)?;
                finite("phase", phase)?;
                finite("offset", offset)?;
                if !(period > 0.0 && period.is_finite()) {
                    return Err(Error::InvalidArgument(format!("sine period = {period} must be > 0")));
                }
                Ok(())
            }
            Self::SmoothSwitch { from, to, center, width } => {
                finite("from", from)?;
                finite("to", to)?;
                finite("center", center)?;
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::InvalidArgument(format!("switch width = {width} must be > 0")));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Sine {
                amplitude,
                period,
                phase,
                offset,
            } => offset + amplitude * (std::f64::consts::TAU * t / period + phase).sin(),
            Self::SmoothSwitch { from, to, center, width } => {
                from + (to - from) * smoothstep((t - center) / width + 0.5)
            }
        }
    }

    /// Analytic bounds on `(sup |theta'|, sup |theta''|)`.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        match *self {
            Self::Constant { .. } => (0.0, 0.0),
            Self::Sine { amplitude, period, .. } => {
                let omega = std::f64::consts::TAU / period;
                (amplitude.abs() * omega, amplitude.abs() * omega * omega)
            }
            Self::SmoothSwitch { from, to, width, .. } => {
                let jump = (to - from).abs();
                (jump * SMOOTHSTEP_D1 / width, jump * SMOOTHSTEP_D2 / (width * width))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgePath {
    pub u: usize,
    pub v: usize,
    #[serde(flatten)]
    pub preset: PathPreset,
}

/// The time-varying parameter `theta^t`; pairs without a path stay at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPath {
    p: usize,
    edges: Vec<EdgePath>,
    m: f64,
    s_max: usize,
}

impl ParameterPath {
    /// Validates the edges and certifies the smoothness bound `M` and the
    /// maximum degree `s_max`. A caller-declared `M` must dominate the
    /// analytic derivative bounds.
    pub fn new(p: usize, edges: Vec<EdgePath>, declared_m: Option<f64>) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument(format!("dimension p = {p} must be at least 2")));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &edges {
            if e.u >= p || e.v >= p {
                return Err(Error::VertexOutOfRange { vertex: e.u.max(e.v), p });
            }
            if e.u == e.v {
                return Err(Error::InvalidArgument(format!("self-loop ({}, {})", e.u, e.v)));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
            e.preset.validate()?;
        }
        let analytic = edges
            .iter()
            .map(|e| {
                let (d1, d2) = e.preset.derivative_bounds();
                d1.max(d2)
            })
            .fold(0.0, f64::max);
        let m = match declared_m {
            Some(m) if m < analytic => {
                return Err(Error::InvalidArgument(format!(
                    "declared smoothness bound M = {m} is below the path derivative bound {analytic}"
                )))
            }
            Some(m) => m,
            None => analytic,
        };
        let mut path = Self { p, edges, m, s_max: 0 };
        path.s_max = (0..DEGREE_GRID)
            .map(|i| path.graph_at(i as f64 / (DEGREE_GRID - 1) as f64).max_degree())
            .max()
            .unwrap_or(0);
        Ok(path)
    }

    pub fn constant(theta: &Couplings) -> Self {
        let edges = crate::model::pairs(theta.p())
            .zip(theta.values())
            .filter(|(_, &v)| v != 0.0)
            .map(|((u, v), &value)| EdgePath {
                u,
                v,
                preset: PathPreset::Constant { value },
            })
            .collect();
        Self::new(theta.p(), edges, None).expect("couplings are a valid constant path")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[EdgePath] {
        &self.edges
    }

    /// Smoothness bound `M` on first and second derivatives.
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn is_constant(&self) -> bool {
        self.edges
            .iter()
            .all(|e| matches!(e.preset, PathPreset::Constant { .. }))
    }

    fn couplings_at(&self, t: f64) -> Couplings {
        let mut c = Couplings::zeros(self.p);
        for e in &self.edges {
            c.set(e.u, e.v, e.preset.value(t)).expect("validated edge");
        }
        c
    }

    fn graph_at(&self, t: f64) -> Graph {
        self.couplings_at(t).graph()
    }

    /// Maximum of central first and second differences over `points` equispaced
    /// grid points on `[0, 1]`, across all edges.
    pub fn numerical_derivative_bounds(&self, points: usize) -> (f64, f64) {
        let step = 1.0 / (points - 1) as f64;
        let mut d1: f64 = 0.0;
        let mut d2: f64 = 0.0;
        for e in &self.edges {
            let vals: Vec<f64> = (0..points).map(|i| e.preset.value(i as f64 * step)).collect();
            for w in vals.windows(3) {
                d1 = d1.max(((w[2] - w[0]) / (2.0 * step)).abs());
                d2 = d2.max(((w[2] - 2.0 * w[1] + w[0]) / (step * step)).abs());
            }
        }
        (d1, d2)
    }
}

/// `theta^t` for `t in [0, 1]`.
pub fn path_value(path: &ParameterPath, t: f64) -> Result<Couplings> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    Ok(path.couplings_at(t))
}
