//! Seeded random streams and sampling primitives.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! 64-bit stream id `domain << 56 | index`. Streams for different domains or
//! indices never overlap, and no generator is shared between trials.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::Dmc;

/// Top byte of the stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Trial = 1,
    Codebook = 2,
    SubCode = 3,
}

const INDEX_MASK: u64 = (1 << 56) - 1;

/// Independent stream for `(seed, domain, index)`; `index` is taken modulo `2^56`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | (index & INDEX_MASK));
    rng
}

/// A source of uniform variates on `[0, 1)`.
pub trait UniformSource {
    fn uniform(&mut self) -> f64;
}

impl<R: RngCore> UniformSource for R {
    fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }
}

/// First index `i` with `u < cdf[i]`; `cdf` is nondecreasing and ends at 1.
pub fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.iter()
        .position(|&c| u < c)
        .unwrap_or(cdf.len() - 1)
}

/// One use of the channel with input `x`, by inverse CDF.
pub fn channel_sample(w: &Dmc, x: usize, source: &mut impl UniformSource) -> usize {
    sample_cdf(w.cdf(x), source.uniform())
}

/// Cumulative sums of `weights` with the last entry pinned to 1.
pub fn cdf_of(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// Uniform index in `0..n` without modulo bias.
pub fn below(source: &mut impl RngCore, n: usize) -> usize {
    source.random_range(0..n)
}
