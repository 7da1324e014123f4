//! Response simulation at fixed per-observation parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dist::{DistError, SimplexParams, SimplexSampler};

/// One tabulated sampler per observation, built once and reused across
/// replicates.
#[derive(Debug, Clone)]
pub struct ResponseSimulator {
    samplers: Vec<SimplexSampler>,
}

impl ResponseSimulator {
    pub fn new(mu: &[f64], sigma2: &[f64]) -> Result<Self, DistError> {
        assert_eq!(mu.len(), sigma2.len());
        let samplers = mu
            .par_iter()
            .zip(sigma2)
            .map(|(&m, &s)| {
                let sampler = SimplexParams::new(m, s).map(SimplexSampler::new)?;
                // Means within ~1e-15 of the boundary cannot be tabulated.
                if (sampler.total_mass() - 1.0).abs() > 1e-6 {
                    return Err(DistError::Domain(format!("cannot tabulate the law at mu = {m}, sigma2 = {s}")));
                }
                Ok(sampler)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { samplers })
    }

    pub fn n(&self) -> usize {
        self.samplers.len()
    }

    /// One response vector. Replicate `index` of base seed `seed` always
    /// yields the same draws, independent of which thread runs it.
    pub fn draw(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = replicate_rng(seed, index);
        self.samplers.iter().map(|s| s.draw(&mut rng)).collect()
    }
}

/// Independent stream per (seed, replicate index).
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
