//! Single-site Gibbs sampling of the pairwise binary field.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{spin_up_probability, Couplings, Observation};

/// A Gibbs chain with systematic-scan single-site updates.
#[derive(Debug, Clone)]
pub struct GibbsChain {
    p: usize,
    dense: Vec<f64>,
    state: Vec<i8>,
}

impl GibbsChain {
    /// Starts from a uniformly random configuration.
    pub fn new<R: Rng + ?Sized>(theta: &Couplings, rng: &mut R) -> Self {
        let p = theta.p();
        let state = (0..p).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self {
            p,
            dense: theta.dense(),
            state,
        }
    }

    pub fn state(&self) -> &[i8] {
        &self.state
    }

    /// Resamples every site once, in index order, from its conditional law.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for u in 0..self.p {
            let row = &self.dense[u * self.p..(u + 1) * self.p];
            let field: f64 = row.iter().zip(&self.state).map(|(t, &x)| t * x as f64).sum();
            let up = spin_up_probability(field);
            self.state[u] = if rng.random::<f64>() < up { 1 } else { -1 };
        }
    }

    /// Runs `burn_in` sweeps, then records the state after every `thin` sweeps.
    pub fn draws<R: Rng + ?Sized>(&mut self, rng: &mut R, burn_in: usize, thin: usize, count: usize) -> Result<Vec<Vec<i8>>> {
        if thin < 1 {
            return Err(Error::InvalidArgument("thin must be >= 1".into()));
        }
        for _ in 0..burn_in {
            self.sweep(rng);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            for _ in 0..thin {
                self.sweep(rng);
            }
            out.push(self.state.clone());
        }
        Ok(out)
    }
}

/// One draw from a fresh chain after `burn_in` sweeps plus `thin` sweeps.
pub fn gibbs_sample<R: Rng + ?Sized>(
    theta: &Couplings,
    rng: &mut R,
    burn_in: usize,
    thin: usize,
    time: f64,
) -> Result<Observation> {
    let mut chain = GibbsChain::new(theta, rng);
    let mut draws = chain.draws(rng, burn_in, thin, 1)?;
    Observation::new(draws.pop().expect("one draw"), time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn independent_spins_are_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut chain = GibbsChain::new(&Couplings::zeros(4), &mut rng);
        let draws = chain.draws(&mut rng, 10, 1, 100_000).unwrap();
        for u in 0..4 {
            let plus = draws.iter().filter(|x| x[u] == 1).count() as f64 / draws.len() as f64;
            assert!((plus - 0.5).abs() < 0.005, "site {u}: {plus}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let theta = Couplings::from_edges(3, &[(0, 1, 0.8), (1, 2, -0.4)]).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chain = GibbsChain::new(&theta, &mut rng);
            chain.draws(&mut rng, 5, 2, 50).unwrap()
        };
        assert_eq!(run(17), run(17));
        assert_ne!(run(17), run(18));
    }

    #[test]
    fn thin_must_be_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gibbs_sample(&Couplings::zeros(2), &mut rng, 0, 0, 0.5).is_err());
    }
}
