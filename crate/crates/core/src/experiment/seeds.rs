//! Per-replicate random streams.
//!
//! Replicate `r` of an experiment with base seed `s` draws from the ChaCha8
//! stream with key derived from `s` and stream id `r`. ChaCha is a counter
//! based generator: streams with different ids never overlap, and the stream
//! a replicate sees depends only on `(s, r)`, so serial and parallel runs draw
//! identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn replicate_rng(base_seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replicate as u64);
    rng
}

/// `n` independent draws from N(mean, variance).
pub fn normal_draws<R: rand::Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    mean: f64,
    variance: f64,
) -> Vec<f64> {
    let sd = variance.sqrt();
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * z
        })
        .collect()
}
