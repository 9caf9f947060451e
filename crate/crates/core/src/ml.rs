//! Maximum-likelihood decoding primitives.
//!
//! Log-likelihoods are evaluated from joint input/output counts, so codewords
//! with the same joint type get bit-identical scores. Scores within [`TIE_TOL`]
//! of each other are ties, resolved toward the smallest message index.

use crate::channel::Dmc;

/// Absolute tolerance under which two log-likelihoods are treated as equal.
pub const TIE_TOL: f64 = 1e-9;

/// Flat `nx * ny` joint counts of `(x_t, y_t)`.
pub fn joint_counts(x: &[usize], y: &[usize], nx: usize, ny: usize) -> Vec<u32> {
    let mut counts = vec![0u32; nx * ny];
    for (&a, &b) in x.iter().zip(y) {
        counts[a * ny + b] += 1;
    }
    counts
}

/// `sum_{a,b} N_ab ln W(b|a)`, accumulated in row-major order.
pub fn ll_from_counts(counts: &[u32], w: &Dmc) -> f64 {
    let ny = w.outputs();
    let logs = w.log_table();
    let mut total = 0.0;
    for (a, row) in logs.iter().enumerate() {
        for (b, l) in row.iter().enumerate() {
            let n = counts[a * ny + b];
            if n > 0 {
                total += n as f64 * l;
            }
        }
    }
    total
}

/// `ln P(y | x)` under the memoryless channel.
pub fn log_likelihood(x: &[usize], y: &[usize], w: &Dmc) -> f64 {
    ll_from_counts(&joint_counts(x, y, w.inputs(), w.outputs()), w)
}

/// First candidate whose score is within [`TIE_TOL`] of the best; `None` if empty.
pub fn argmax_scores(scores: &[(usize, f64)]) -> Option<usize> {
    let best = scores
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .filter(|s| s.1 >= best - TIE_TOL)
        .map(|s| s.0)
        .min()
}

/// ML decision among `candidates` (indices into `codewords`).
pub fn ml_among(
    candidates: impl IntoIterator<Item = usize>,
    codewords: &[Vec<usize>],
    y: &[usize],
    w: &Dmc,
) -> Option<usize> {
    let scores: Vec<(usize, f64)> = candidates
        .into_iter()
        .map(|i| (i, log_likelihood(&codewords[i], y, w)))
        .collect();
    argmax_scores(&scores)
}

/// A codebook stored as per-letter bitplanes for popcount-based ML decoding.
///
/// Scores use `N_{last,b} = |Y_b| - sum_{a < last} N_ab`, so only the first
/// `nx - 1` input planes are stored, and `N_{a,last} = |x_a| - sum_{b < last} N_ab`,
/// so only the first `ny - 1` output planes are intersected.
#[derive(Clone, Debug)]
pub struct PackedCode {
    len: usize,
    words: usize,
    inputs: usize,
    size: usize,
    /// `planes[(m * (inputs - 1) + a) * words + k]`.
    planes: Vec<u64>,
    /// Popcount of each plane.
    weights: Vec<u32>,
}

impl PackedCode {
    pub fn new(codewords: &[Vec<usize>], len: usize, inputs: usize) -> Self {
        Self::from_fn(codewords.len(), len, inputs, |m, t| codewords[m][t])
    }

    /// Builds from `letter(m, t)`, the letter of codeword `m` at time `t`.
    pub fn from_fn(
        size: usize,
        len: usize,
        inputs: usize,
        letter: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let words = len.div_ceil(64);
        let stride = inputs - 1;
        let mut planes = vec![0u64; size * stride * words];
        for m in 0..size {
            for t in 0..len {
                let a = letter(m, t);
                if a < stride {
                    planes[(m * stride + a) * words + t / 64] |= 1u64 << (t % 64);
                }
            }
        }
        let weights = (0..size * stride)
            .map(|i| planes[i * words..(i + 1) * words].iter().map(|w| w.count_ones()).sum())
            .collect();
        Self {
            len,
            words,
            inputs,
            size,
            planes,
            weights,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// ML decision for output `y`, smallest index on ties.
    pub fn decode(&self, y: &[usize], w: &Dmc) -> usize {
        let ny = w.outputs();
        let last = self.inputs - 1;
        let logs = w.log_table();
        let mut y_planes = vec![0u64; ny * self.words];
        let mut y_counts = vec![0u32; ny];
        for (t, &b) in y.iter().enumerate() {
            y_planes[b * self.words + t / 64] |= 1u64 << (t % 64);
            y_counts[b] += 1;
        }
        let base: f64 = (0..ny)
            .map(|b| y_counts[b] as f64 * logs[last][b])
            .sum();
        let gain: Vec<f64> = (0..last)
            .flat_map(|a| (0..ny).map(move |b| logs[a][b] - logs[last][b]))
            .collect();
        if self.words == 0 {
            return 0;
        }
        let y_inner = &y_planes[..(ny - 1) * self.words];
        let mut scores = Vec::with_capacity(self.size);
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("popcnt") {
            // SAFETY: the feature was detected at runtime.
            unsafe { self.score_popcnt(base, &gain, y_inner, ny, &mut scores) };
        }
        if scores.is_empty() {
            self.score(base, &gain, y_inner, ny, &mut scores);
        }
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        scores
            .iter()
            .position(|&s| s >= best - TIE_TOL)
            .expect("nonempty code")
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "popcnt")]
    unsafe fn score_popcnt(&self, base: f64, gain: &[f64], y: &[u64], ny: usize, out: &mut Vec<f64>) {
        self.score(base, gain, y, ny, out)
    }

    /// Appends the log-likelihood of every codeword; `y` holds the first `ny - 1` output planes.
    #[inline(always)]
    fn score(&self, base: f64, gain: &[f64], y: &[u64], ny: usize, out: &mut Vec<f64>) {
        let last = self.inputs - 1;
        for (planes, weights) in self
            .planes
            .chunks_exact(last * self.words)
            .zip(self.weights.chunks_exact(last))
        {
            let mut score = base;
            for ((plane, &weight), gains) in planes
                .chunks_exact(self.words)
                .zip(weights)
                .zip(gain.chunks_exact(ny))
            {
                let mut rest = weight;
                for (yp, g) in y.chunks_exact(self.words).zip(gains) {
                    let n: u32 = plane
                        .iter()
                        .zip(yp)
                        .map(|(p, q)| (p & q).count_ones())
                        .sum();
                    rest -= n;
                    score += n as f64 * g;
                }
                score += rest as f64 * gains[ny - 1];
            }
            out.push(score);
        }
    }
}
