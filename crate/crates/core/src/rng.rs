//! Seedable pseudo-random source with derivable sub-streams.
//!
//! Every encoder instance draws from its own sub-stream so that adding a
//! lane or reordering trials never perturbs the bits of another lane.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to spread user seeds and stream tags.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(mix64(seed)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent sub-source identified by `tag`. Depends only on the
    /// parent seed and the tag, never on how much the parent has been used.
    pub fn derive(&self, tag: u64) -> RandomSource {
        RandomSource::new(mix64(self.seed ^ mix64(tag.wrapping_add(0x5bd1_e995))))
    }

    /// Uniform sample in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform sample in [lo, hi).
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Comparator against a uniform sample: true with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
