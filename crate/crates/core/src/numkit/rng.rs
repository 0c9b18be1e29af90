use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{contract, Result};

/// Seeded random source.
///
/// Backed by the ChaCha8 stream cipher (a counter-based generator), keyed from
/// the 64-bit seed with `rand_core`'s portable `seed_from_u64` expansion.
/// Gaussian draws use `rand_distr`'s ziggurat sampler. Both are specified
/// independently of platform and word size, so a seed reproduces the same
/// stream everywhere.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for a named sub-stream of this seed.
    pub fn fork(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        Rng {
            seed: self.seed,
            inner,
        }
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..=hi)
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// One draw of `N(mean, std²)`.
    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }

    /// `k` distinct indices out of `0..n`, in increasing order.
    /// Uniformly random ordering of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut self.inner);
        p
    }

    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut picked = rand::seq::index::sample(&mut self.inner, n, k).into_vec();
        picked.sort_unstable();
        picked
    }
}

/// `n` i.i.d. draws of `N(mean, var)`. A zero variance returns the mean
/// without consuming randomness.
pub fn gaussian(rng: &mut Rng, mean: f64, var: f64, n: usize) -> Result<Vec<f64>> {
    contract!(var >= 0.0 && var.is_finite(), "variance {var} must be finite and >= 0");
    if var == 0.0 {
        return Ok(vec![mean; n]);
    }
    let std = var.sqrt();
    Ok((0..n).map(|_| rng.normal(mean, std)).collect())
}
