//! Exact computations over the full state space `{-1,+1}^p`, `p <= 20`.
//!
//! State `k` assigns `x_j = +1` when bit `j` of `k` is set and `x_j = -1`
//! otherwise.

use rand::Rng;

use crate::error::{Error, Result, ENUMERATION_LIMIT};
use crate::model::{Couplings, Observation};

pub(crate) fn check_enumerable(p: usize) -> Result<()> {
    if p > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            p,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Spin vector of state `index`.
pub fn state_spins(p: usize, index: usize) -> Vec<i8> {
    (0..p).map(|j| if index >> j & 1 == 1 { 1 } else { -1 }).collect()
}

/// Unnormalized log-weights `sum_{u<v} theta_uv x_u x_v` of every state.
///
/// Built by setting one bit at a time: the state with highest bit `k` is
/// derived from the state without it, so each value is at most `p`
/// additions away from the all-minus state.
pub fn log_weights(theta: &Couplings) -> Result<Vec<f64>> {
    let p = theta.p();
    check_enumerable(p)?;
    let dense = theta.dense();
    let mut out = vec![0.0; 1usize << p];
    // all spins -1: sum_{u<v} theta_uv
    out[0] = theta.values().iter().sum();
    for k in 0..p {
        let base = 1usize << k;
        let row = &dense[k * p..(k + 1) * p];
        for s in 0..base {
            // flipping x_k from -1 to +1 adds 2 sum_{j != k} theta_kj x_j
            let field: f64 = row
                .iter()
                .enumerate()
                .map(|(j, &t)| if j < k && s >> j & 1 == 1 { t } else { -t })
                .sum();
            out[base | s] = out[s] + 2.0 * field;
        }
    }
    Ok(out)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log Z(theta)`.
pub fn exact_log_partition(theta: &Couplings) -> Result<f64> {
    Ok(log_sum_exp(&log_weights(theta)?))
}

/// `Z(theta) = sum_x exp(sum_{u<v} theta_uv x_u x_v)`.
pub fn exact_partition(theta: &Couplings) -> Result<f64> {
    Ok(exact_log_partition(theta)?.exp())
}

/// Probability of every state, normalized by the total of max-shifted weights.
pub fn state_probabilities(theta: &Couplings) -> Result<Vec<f64>> {
    let lw = log_weights(theta)?;
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = lw.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for q in probs.iter_mut() {
        *q /= total;
    }
    Ok(probs)
}

/// Inverse-CDF sampler over the enumerated law.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    p: usize,
    cumulative: Vec<f64>,
}

impl ExactSampler {
    pub fn new(theta: &Couplings) -> Result<Self> {
        let probs = state_probabilities(theta)?;
        let mut acc = 0.0;
        let cumulative = probs
            .into_iter()
            .map(|q| {
                acc += q;
                acc
            })
            .collect();
        Ok(Self { p: theta.p(), cumulative })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let target = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1)
    }

    pub fn sample_spins<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i8> {
        state_spins(self.p, self.sample_index(rng))
    }
}

/// One exact draw from the law with couplings `theta`, stamped with `time`.
pub fn exact_sample<R: Rng + ?Sized>(theta: &Couplings, rng: &mut R, time: f64) -> Result<Observation> {
    let sampler = ExactSampler::new(theta)?;
    Observation::new(sampler.sample_spins(rng), time)
}
