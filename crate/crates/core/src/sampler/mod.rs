//! Synthetic data from the time-varying model: smooth parameter paths,
//! exact enumeration (partition function, moments, inverse-CDF sampling)
//! and Gibbs sampling.

mod exact;
mod gibbs;
mod path;

pub use exact::{
    exact_log_partition, exact_partition, exact_sample, log_weights, state_probabilities, state_spins, ExactSampler,
};
pub(crate) use exact::check_enumerable;
pub use gibbs::{gibbs_sample, GibbsChain};
pub use path::{path_value, EdgePath, ParameterPath, PathPreset};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{equispaced_time, Dataset, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SamplerMethod {
    Exact,
    Gibbs { burn_in: usize, thin: usize },
}

impl Default for SamplerMethod {
    fn default() -> Self {
        Self::Exact
    }
}

/// Random stream for draw `index` under `seed`; independent of scheduling.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one independent observation from `P_{theta^{t_i}}` at each
/// `t_i = i / n`, each from its own random stream (a fresh Gibbs chain per
/// time point in the Gibbs case).
pub fn generate_dataset(path: &ParameterPath, n: usize, method: SamplerMethod, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if let SamplerMethod::Exact = method {
        check_enumerable(path.p())?;
    }
    if let SamplerMethod::Gibbs { thin: 0, .. } = method {
        return Err(Error::InvalidArgument("thin must be >= 1".into()));
    }

    let shared = match method {
        SamplerMethod::Exact if path.is_constant() => Some(ExactSampler::new(&path_value(path, 0.5)?)?),
        _ => None,
    };

    let observations = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = equispaced_time(i, n);
            let mut rng = stream_rng(seed, i as u64);
            let theta = path_value(path, t)?;
            match method {
                SamplerMethod::Exact => {
                    let spins = match &shared {
                        Some(sampler) => sampler.sample_spins(&mut rng),
                        None => ExactSampler::new(&theta)?.sample_spins(&mut rng),
                    };
                    Observation::new(spins, t)
                }
                SamplerMethod::Gibbs { burn_in, thin } => gibbs_sample(&theta, &mut rng, burn_in, thin, t),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Couplings;

    fn switch_path() -> ParameterPath {
        ParameterPath::new(
            3,
            vec![EdgePath {
                u: 0,
                v: 1,
                preset: PathPreset::SmoothSwitch {
                    from: 1.2,
                    to: 0.0,
                    center: 0.45,
                    width: 0.1,
                },
            }],
            None,
        )
        .unwrap()
    }

    fn mean_product(data: &Dataset, lo: f64, hi: f64, u: usize, v: usize) -> f64 {
        let sel: Vec<f64> = data
            .observations()
            .iter()
            .filter(|o| o.time() >= lo && o.time() <= hi)
            .map(|o| (o.values()[u] * o.values()[v]) as f64)
            .collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    }

    #[test]
    fn constant_path_matches_enumerated_moments() {
        let theta = Couplings::from_edges(4, &[(0, 1, 0.6), (1, 2, -0.4), (2, 3, 0.3)]).unwrap();
        let path = ParameterPath::constant(&theta);
        let n = 20_000;
        let data = generate_dataset(&path, n, SamplerMethod::Exact, 7).unwrap();
        let probs = state_probabilities(&theta).unwrap();
        for (u, v) in crate::model::pairs(4) {
            let exact: f64 = probs
                .iter()
                .enumerate()
                .map(|(k, q)| {
                    let x = state_spins(4, k);
                    q * (x[u] * x[v]) as f64
                })
                .sum();
            let emp = mean_product(&data, 0.0, 1.0, u, v);
            let se = ((1.0 - exact * exact) / n as f64).sqrt();
            assert!((emp - exact).abs() < 3.0 * se, "({u},{v}): {emp} vs {exact}");
        }
    }

    #[test]
    fn switching_edge_changes_correlation() {
        let data = generate_dataset(&switch_path(), 4000, SamplerMethod::Exact, 3).unwrap();
        let early = mean_product(&data, 0.0, 0.3, 0, 1);
        let late = mean_product(&data, 0.6, 1.0, 0, 1);
        // early: tanh(1.2) ~ 0.83 with se ~ 0.01; late: 0 with se ~ 0.02
        assert!(early - late > 0.6, "{early} vs {late}");
    }

    #[test]
    fn gibbs_dataset_tracks_exact_moments() {
        let path = switch_path();
        let data = generate_dataset(&path, 3000, SamplerMethod::Gibbs { burn_in: 50, thin: 1 }, 1).unwrap();
        let early = mean_product(&data, 0.0, 0.35, 0, 1);
        assert!((early - 1.2f64.tanh()).abs() < 0.05, "{early}");
    }

    #[test]
    fn lag_one_autocorrelation_is_small() {
        let theta = Couplings::from_edges(3, &[(0, 1, 0.9)]).unwrap();
        let n = 10_000;
        let data = generate_dataset(&ParameterPath::constant(&theta), n, SamplerMethod::Exact, 21).unwrap();
        for u in 0..3 {
            let x: Vec<f64> = data.observations().iter().map(|o| o.values()[u] as f64).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
            assert!((cov / var).abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let path = switch_path();
        let a = generate_dataset(&path, 200, SamplerMethod::Exact, 9).unwrap();
        let b = generate_dataset(&path, 200, SamplerMethod::Exact, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times()[199], 1.0);
        assert!(generate_dataset(&path, 0, SamplerMethod::Exact, 9).is_err());
        let big = ParameterPath::new(21, vec![], None).unwrap();
        assert!(matches!(
            generate_dataset(&big, 5, SamplerMethod::Exact, 0),
            Err(Error::EnumerationLimit { .. })
        ));
        assert!(generate_dataset(&big, 5, SamplerMethod::Gibbs { burn_in: 5, thin: 1 }, 0).is_ok());
    }
}
