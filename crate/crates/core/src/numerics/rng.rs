//! Reproducible Monte Carlo plumbing.
//!
//! Work is cut into fixed-size shards. Shard `i` draws from a ChaCha8
//! stream keyed by `(seed, i)`, and shard results are reduced in index
//! order, so estimates are bit-identical for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of samples per shard.
pub const SHARD_SIZE: usize = 1 << 14;

/// Independent generator for one shard.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}

/// Runs `work(rng, count)` for every shard of an `n`-sample job in
/// parallel and returns the shard results in shard order.
pub fn run_sharded<T, F>(seed: u64, n: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    (0..shards)
        .into_par_iter()
        .map(|i| {
            let count = SHARD_SIZE.min(n - i * SHARD_SIZE);
            let mut rng = shard_rng(seed, i as u64);
            work(&mut rng, count)
        })
        .collect()
}

/// Running first and second moments of a real observable.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean, using the unbiased sample variance.
    pub fn std_error(&self) -> f64 {
        let n = self.n as f64;
        let mean = self.mean();
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Summary of a Monte Carlo estimate against a reference value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub estimate: f64,
    pub std_error: f64,
    pub reference: f64,
    /// |estimate - reference| / std_error (0 when both vanish).
    pub z_score: f64,
}

impl McComparison {
    pub fn new(m: &Moments, reference: f64) -> Self {
        let estimate = m.mean();
        let std_error = m.std_error();
        let gap = (estimate - reference).abs();
        let z_score = if gap == 0.0 { 0.0 } else { gap / std_error };
        Self { estimate, std_error, reference, z_score }
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.z_score <= sigmas
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sharded_results_are_deterministic() {
        let run = || -> Vec<f64> { run_sharded(7, 3 * SHARD_SIZE + 5, |rng, c| (0..c).map(|_| rng.gen::<f64>()).sum()) };
        assert_eq!(run(), run());
        assert_eq!(run().len(), 4);
    }

    #[test]
    fn streams_differ_between_shards() {
        let a: u64 = shard_rng(1, 0).gen();
        let b: u64 = shard_rng(1, 1).gen();
        assert_ne!(a, b);
    }

    #[test]
    fn moments_standard_error() {
        let mut m = Moments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert!((m.mean() - 2.5).abs() < 1e-15);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((m.std_error() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
