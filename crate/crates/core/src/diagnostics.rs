//! Fisher information and covariance matrices (population by enumeration,
//! sample by kernel weighting), the dependency/incoherence checks and the
//! deviation of sample from population matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::kernel::WeightVector;
use crate::model::{field_from_spins, sech_squared, vertex_of, Couplings, Dataset, NodeParameter};
use crate::sampler::{check_enumerable, path_value, state_probabilities, state_spins, ParameterPath};

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub node: usize,
    pub tau: f64,
    /// `(p - 1) x (p - 1)`, rows and columns in skip-node order.
    pub matrix: DMatrix<f64>,
}

/// A quantity that may be undefined for structural reasons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Check {
    Value(f64),
    /// The true neighborhood is empty, so `Q_SS` has no rows.
    EmptyNeighborhood,
    /// `Q_SS` is numerically singular; stands in for `alpha = -inf`.
    Singular,
}

impl Check {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Self::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherReference {
    /// Evaluated at the true parameter (simulation).
    True,
    /// Evaluated at an estimate (data-only, heuristic).
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviations {
    /// `max_u max_{v,v'} |Q_hat_u - Q_u|`.
    pub fisher_max_abs: f64,
    /// `max_{u,v} |Sigma_hat - Sigma|`.
    pub cov_max_abs: f64,
    pub reference: FisherReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub node: usize,
    /// True neighborhood `S` of `node`.
    pub neighborhood: Vec<usize>,
    /// `Lambda_min(Q_SS)`.
    pub c_min: Check,
    /// `Lambda_min(Sigma)`.
    pub d_min: f64,
    /// `Lambda_max(Sigma)`.
    pub d_max: f64,
    /// `||Q_{S^c S} Q_SS^{-1}||_inf` (max absolute row sum).
    pub incoherence: Check,
    /// `1 - incoherence`; reported even when not positive.
    pub alpha: Check,
    /// Smallest `|theta_uv|` over all edges, `None` for an empty graph.
    pub theta_min: Option<f64>,
    /// Maximum degree of the true graph.
    pub s: usize,
    pub deviations: Option<Deviations>,
}

fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let v = symmetric_eigenvalues(m);
    (v[0], v[v.len() - 1])
}

/// `Q_u = E[eta(X; theta_u) X_{\u} X_{\u}']` under the enumerated law.
pub fn population_fisher(theta: &Couplings, u: usize, tau: f64) -> Result<FisherMatrix> {
    let p = theta.p();
    check_enumerable(p)?;
    if u >= p {
        return Err(Error::VertexOutOfRange { vertex: u, p });
    }
    let node = theta.node_parameter(u)?;
    let probs = state_probabilities(theta)?;
    let d = p - 1;
    let mut m = DMatrix::zeros(d, d);
    for (k, &q) in probs.iter().enumerate() {
        let x = state_spins(p, k);
        let c = q * sech_squared(field_from_spins(node.theta(), &x, u));
        accumulate_outer(&mut m, c, &x, u);
    }
    symmetrize(&mut m);
    Ok(FisherMatrix { node: u, tau, matrix: m })
}

/// `Sigma = E[X X']` under the enumerated law.
pub fn population_covariance(theta: &Couplings) -> Result<DMatrix<f64>> {
    let p = theta.p();
    check_enumerable(p)?;
    let probs = state_probabilities(theta)?;
    let mut m = DMatrix::zeros(p, p);
    for (k, &q) in probs.iter().enumerate() {
        let x = state_spins(p, k);
        for a in 0..p {
            for b in a..p {
                m[(a, b)] += q * (x[a] * x[b]) as f64;
            }
        }
    }
    symmetrize(&mut m);
    Ok(m)
}

/// `Q_hat = sum_t w_t eta(x^t; theta_ref) x_{\u}^t x_{\u}^t'`.
pub fn sample_fisher(data: &Dataset, w: &WeightVector, theta_ref: &NodeParameter, u: usize) -> Result<FisherMatrix> {
    check_weights(data, w)?;
    if theta_ref.p() != data.p() || theta_ref.node() != u {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: theta_ref.p(),
        });
    }
    let d = data.p() - 1;
    let mut m = DMatrix::zeros(d, d);
    for (i, wt) in w.support() {
        let x = data.observations()[i].values();
        let c = wt * sech_squared(field_from_spins(theta_ref.theta(), x, u));
        accumulate_outer(&mut m, c, x, u);
    }
    symmetrize(&mut m);
    Ok(FisherMatrix {
        node: u,
        tau: w.tau(),
        matrix: m,
    })
}

/// `Sigma_hat = sum_t w_t x^t x^t'`.
pub fn sample_covariance(data: &Dataset, w: &WeightVector) -> Result<DMatrix<f64>> {
    check_weights(data, w)?;
    let p = data.p();
    let mut m = DMatrix::zeros(p, p);
    for (i, wt) in w.support() {
        let x = data.observations()[i].values();
        for a in 0..p {
            for b in a..p {
                m[(a, b)] += wt * (x[a] * x[b]) as f64;
            }
        }
    }
    symmetrize(&mut m);
    Ok(m)
}

fn check_weights(data: &Dataset, w: &WeightVector) -> Result<()> {
    if w.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: w.len(),
        });
    }
    if w.support().next().is_none() {
        return Err(Error::EmptyWindow { tau: w.tau(), h: w.h() });
    }
    Ok(())
}

/// Adds `c x_{\u} x_{\u}'` to the upper triangle of `m`.
fn accumulate_outer(m: &mut DMatrix<f64>, c: f64, x: &[i8], u: usize) {
    let d = m.nrows();
    for a in 0..d {
        let xa = x[vertex_of(u, a)];
        for b in a..d {
            m[(a, b)] += c * (xa * x[vertex_of(u, b)]) as f64;
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    for a in 0..m.nrows() {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dependency and incoherence quantities of node `u` at the true parameter.
pub fn check_assumptions(theta: &Couplings, u: usize) -> Result<DiagnosticsReport> {
    let fisher = population_fisher(theta, u, f64::NAN)?;
    let sigma = population_covariance(theta)?;
    let (d_min, d_max) = eigen_range(&sigma);

    let node = theta.node_parameter(u)?;
    let support_slots: Vec<usize> = (0..node.theta().len()).filter(|&k| node.theta()[k] != 0.0).collect();
    let other_slots: Vec<usize> = (0..node.theta().len()).filter(|&k| node.theta()[k] == 0.0).collect();
    let neighborhood = support_slots.iter().map(|&k| node.vertex_of(k)).collect();

    let (c_min, incoherence) = if support_slots.is_empty() {
        (Check::EmptyNeighborhood, Check::EmptyNeighborhood)
    } else {
        let q_ss = fisher.matrix.select_rows(&support_slots).select_columns(&support_slots);
        let q_cs = fisher.matrix.select_rows(&other_slots).select_columns(&support_slots);
        let (lo, hi) = eigen_range(&q_ss);
        let c_min = Check::Value(lo);
        let incoherence = if lo <= 1e-12 * hi.max(1.0) {
            Check::Singular
        } else {
            match q_ss.clone().try_inverse() {
                None => Check::Singular,
                Some(inv) => {
                    let prod = q_cs * inv;
                    let norm = prod
                        .row_iter()
                        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                        .fold(0.0, f64::max);
                    Check::Value(norm)
                }
            }
        };
        (c_min, incoherence)
    };
    let alpha = match incoherence {
        Check::Value(norm) => Check::Value(1.0 - norm),
        other => other,
    };
    let theta_min = theta
        .values()
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .reduce(f64::min);

    Ok(DiagnosticsReport {
        node: u,
        neighborhood,
        c_min,
        d_min,
        d_max,
        incoherence,
        alpha,
        theta_min,
        s: theta.graph().max_degree(),
        deviations: None,
    })
}

/// Maximum entrywise deviation of the kernel-weighted sample Fisher (at the
/// true `theta^tau`, maximized over nodes) and covariance matrices from
/// their population values at `tau`.
pub fn deviation_report(data: &Dataset, path: &ParameterPath, tau: f64, cfg: &EstimatorConfig) -> Result<Deviations> {
    if path.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: path.p(),
            found: data.p(),
        });
    }
    let theta = path_value(path, tau)?;
    let w = cfg.weights(data, tau)?;
    let cov_max_abs = max_abs_diff(&sample_covariance(data, &w)?, &population_covariance(&theta)?);
    let mut fisher_max_abs: f64 = 0.0;
    for u in 0..data.p() {
        let truth = population_fisher(&theta, u, tau)?;
        let sample = sample_fisher(data, &w, &theta.node_parameter(u)?, u)?;
        fisher_max_abs = fisher_max_abs.max(max_abs_diff(&sample.matrix, &truth.matrix));
    }
    Ok(Deviations {
        fisher_max_abs,
        cov_max_abs,
        reference: FisherReference::True,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{Bandwidth, Penalty};
    use crate::kernel::{weights, KernelSpec};
    use crate::sampler::{generate_dataset, ExactSampler, SamplerMethod};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(p: usize, strength: f64) -> Couplings {
        let edges: Vec<(usize, usize, f64)> = (0..p - 1).map(|i| (i, i + 1, strength)).collect();
        Couplings::from_edges(p, &edges).unwrap()
    }

    fn assert_symmetric_psd(m: &DMatrix<f64>) {
        assert_eq!(m, &m.transpose());
        assert!(symmetric_eigenvalues(m).iter().all(|&e| e >= -1e-10));
    }

    #[test]
    fn independent_spins_give_identity() {
        let theta = Couplings::zeros(5);
        let q = population_fisher(&theta, 2, 0.5).unwrap();
        assert_eq!(q.matrix, DMatrix::identity(4, 4));
        assert_eq!(population_covariance(&theta).unwrap(), DMatrix::identity(5, 5));
        let r = check_assumptions(&theta, 0).unwrap();
        assert_eq!(r.c_min, Check::EmptyNeighborhood);
        assert_eq!(r.alpha, Check::EmptyNeighborhood);
        assert!((r.d_min - 1.0).abs() < 1e-12 && (r.d_max - 1.0).abs() < 1e-12);
        assert_eq!(r.s, 0);
        assert_eq!(r.theta_min, None);
    }

    #[test]
    fn two_node_covariance_is_tanh() {
        for beta in [0.0f64, 0.5, 2.0, -1.3] {
            let c = Couplings::from_edges(2, &[(0, 1, beta)]).unwrap();
            let s = population_covariance(&c).unwrap();
            assert!((s[(0, 1)] - beta.tanh()).abs() < 1e-10);
            assert_symmetric_psd(&s);
        }
    }

    #[test]
    fn population_fisher_matches_monte_carlo() {
        let theta = Couplings::from_edges(3, &[(0, 1, 0.5)]).unwrap();
        let q = population_fisher(&theta, 0, 0.5).unwrap();
        assert_symmetric_psd(&q.matrix);
        let sampler = ExactSampler::new(&theta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = 1_000_000;
        let node = theta.node_parameter(0).unwrap();
        let mut sum = DMatrix::<f64>::zeros(2, 2);
        let mut sum_sq = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..draws {
            let x = sampler.sample_spins(&mut rng);
            let eta = sech_squared(field_from_spins(node.theta(), &x, 0));
            for a in 0..2 {
                for b in 0..2 {
                    let v = eta * (x[a + 1] * x[b + 1]) as f64;
                    sum[(a, b)] += v;
                    sum_sq[(a, b)] += v * v;
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                let mean = sum[(a, b)] / draws as f64;
                let var = sum_sq[(a, b)] / draws as f64 - mean * mean;
                let se = (var / draws as f64).sqrt().max(1e-12);
                assert!((mean - q.matrix[(a, b)]).abs() < 3.0 * se, "({a},{b})");
            }
        }
    }

    #[test]
    fn chain_assumptions_hold() {
        let r = check_assumptions(&chain(4, 0.5), 1).unwrap();
        assert_eq!(r.neighborhood, vec![0, 2]);
        let alpha = r.alpha.value().unwrap();
        let c_min = r.c_min.value().unwrap();
        assert!(alpha > 0.0 && alpha <= 1.0);
        assert!(c_min > 0.0);
        assert!(r.d_min > 0.0 && r.d_min <= r.d_max);
        assert_eq!(r.theta_min, Some(0.5));
        assert_eq!(r.s, 2);

        let doubled = check_assumptions(&chain(4, 1.0), 1).unwrap();
        assert_eq!(doubled.s, r.s);
        assert_ne!(doubled.c_min, r.c_min);
        assert_ne!(doubled.alpha, r.alpha);
        assert_ne!(doubled.d_min, r.d_min);
        assert_ne!(doubled.d_max, r.d_max);
        assert_ne!(doubled.theta_min, r.theta_min);
    }

    #[test]
    fn sample_fisher_at_zero_is_covariance_block() {
        let theta = chain(5, 0.7);
        let data = generate_dataset(&ParameterPath::constant(&theta), 400, SamplerMethod::Exact, 2).unwrap();
        let w = weights(&KernelSpec::new(crate::kernel::KernelShape::Epanechnikov), 0.3, &data.times(), 0.6).unwrap();
        let cov = sample_covariance(&data, &w).unwrap();
        for i in 0..5 {
            assert!((cov[(i, i)] - 1.0).abs() < 1e-12);
        }
        assert_symmetric_psd(&cov);
        for u in 0..5 {
            let q = sample_fisher(&data, &w, &NodeParameter::zeros(5, u).unwrap(), u).unwrap();
            let keep: Vec<usize> = (0..5).filter(|&v| v != u).collect();
            let block = cov.select_rows(&keep).select_columns(&keep);
            assert_eq!(q.matrix, block);

            let q = sample_fisher(&data, &w, &theta.node_parameter(u).unwrap(), u).unwrap();
            assert_symmetric_psd(&q.matrix);
            for i in 0..4 {
                assert!(q.matrix[(i, i)] > 0.0 && q.matrix[(i, i)] <= 1.0);
            }
        }
    }

    #[test]
    fn independent_data_has_small_off_diagonal() {
        let data = generate_dataset(&ParameterPath::new(4, vec![], None).unwrap(), 5000, SamplerMethod::Exact, 8).unwrap();
        let w = weights(&KernelSpec::default(), 0.2, &data.times(), 0.5).unwrap();
        let cov = sample_covariance(&data, &w).unwrap();
        let bound = 3.0 / w.effective_n().sqrt();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!(cov[(a, b)].abs() < bound);
                }
            }
        }
    }

    #[test]
    fn deviation_report_errors_and_values() {
        let path = ParameterPath::constant(&chain(4, 0.5));
        let data = generate_dataset(&path, 2000, SamplerMethod::Exact, 4).unwrap();
        let cfg = EstimatorConfig {
            bandwidth: Bandwidth::Fixed(1.0),
            lambda: Penalty::Fixed(0.1),
            ..EstimatorConfig::default()
        };
        let d = deviation_report(&data, &path, 0.5, &cfg).unwrap();
        assert!(d.cov_max_abs < 0.1 && d.fisher_max_abs < 0.1);
        assert_eq!(d.reference, FisherReference::True);
        let narrow = EstimatorConfig {
            bandwidth: Bandwidth::Fixed(1e-5),
            ..cfg
        };
        assert!(matches!(
            deviation_report(&data, &path, 0.4999, &narrow),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn enumeration_limit_is_enforced() {
        assert!(matches!(
            population_covariance(&Couplings::zeros(21)),
            Err(Error::EnumerationLimit { .. })
        ));
        assert!(population_fisher(&Couplings::zeros(21), 0, 0.0).is_err());
    }
}
