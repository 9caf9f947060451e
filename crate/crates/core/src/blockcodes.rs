//! Fixed-length codes with special messages and their two-clause decoders.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;
use crate::exact::in_sup_ball;
use crate::exponents::{self, ExponentError, REFERENCE_TOL};
use crate::ml::{self, TIE_TOL};
use crate::probability::Distribution;
use crate::rng::{self, Domain};

/// Slack on shell membership `D(V || W | P) <= threshold`.
pub const SHELL_SLACK: f64 = 1e-12;

/// Ordinary-codeword redraws allowed per ordinary message.
pub const RESAMPLE_BUDGET_PER_CODEWORD: usize = 1_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockCodeError {
    #[error("block length must be positive")]
    ZeroLength,
    #[error("need at least {min} {what} messages, got {got}")]
    TooFewMessages {
        what: &'static str,
        min: usize,
        got: usize,
    },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("erasure threshold must be nonnegative, got {0}")]
    BadThreshold(f64),
    #[error("radius must be nonnegative, got {0}")]
    BadRadius(f64),
    #[error("output has length {got}, code has length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("output symbol {symbol} at position {position} is outside the output alphabet")]
    SymbolOutOfRange { position: usize, symbol: usize },
    #[error("gave up after {attempts} redraws of ordinary codewords inside special shells")]
    ResampleBudget { attempts: usize },
    #[error("decoder does not match the code construction")]
    WrongScheme,
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

pub type Result<T> = std::result::Result<T, BlockCodeError>;

/// Decoding rule parameters carried by a codebook.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Special iff the output type leaves the ball around `center` (`P_Y*`).
    SpecialMessage { center: Vec<f64>, x_r: usize },
    /// Specials own shells `{y : D(V_y|x_i || W | P) <= threshold}`.
    TwoStage {
        threshold: f64,
        rate: f64,
        epsilon: f64,
    },
    /// Special iff the output type lies in the ball around `center` (`W(.|x_fl)`).
    FalseAlarm { center: Vec<f64>, x_fl: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub codewords: Vec<Vec<usize>>,
    pub special_set: Vec<usize>,
    /// Exact type shared by the fixed-composition rows, when present.
    pub composition: Option<Distribution>,
    #[serde(rename = "radius")]
    pub typicality_radius: f64,
    pub scheme: Scheme,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeOutcome {
    Message(usize),
    Erasure,
}

/// `n^{-1/4}`.
pub fn default_radius(n: usize) -> f64 {
    (n as f64).powf(-0.25)
}

impl Codebook {
    pub fn size(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_special(&self, m: usize) -> bool {
        self.special_set.contains(&m)
    }

    pub fn ordinary(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.size()).filter(|m| !self.is_special(*m))
    }

    /// Replaces the typicality radius with a fixed `delta`.
    pub fn with_radius(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(BlockCodeError::BadRadius(delta));
        }
        self.typicality_radius = delta;
        Ok(self)
    }

    fn check_output(&self, y: &[usize], w: &Dmc) -> Result<()> {
        if y.len() != self.n {
            return Err(BlockCodeError::LengthMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        if let Some((position, &symbol)) = y.iter().enumerate().find(|(_, &b)| b >= w.outputs()) {
            return Err(BlockCodeError::SymbolOutOfRange { position, symbol });
        }
        Ok(())
    }
}

/// Output letter counts of `y`.
pub fn output_counts(y: &[usize], outputs: usize) -> Vec<u64> {
    let mut counts = vec![0u64; outputs];
    for &b in y {
        counts[b] += 1;
    }
    counts
}

/// Type of size `n` closest to `p`: floors plus largest remainders, smallest index first on ties.
pub fn nearest_type(p: &Distribution, n: usize) -> Vec<usize> {
    let scaled: Vec<f64> = p.weights().iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|v| v.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn fixed_composition_word(counts: &[usize], rng: &mut impl rand::RngCore) -> Vec<usize> {
    let mut word: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(a, &c)| std::iter::repeat_n(a, c))
        .collect();
    word.shuffle(rng);
    word
}

fn iid_word(cdf: &[f64], n: usize, rng: &mut impl rand::RngCore) -> Vec<usize> {
    (0..n)
        .map(|_| rng::sample_cdf(cdf, rng::UniformSource::uniform(rng)))
        .collect()
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(BlockCodeError::ZeroLength);
    }
    Ok(())
}

fn check_count(what: &'static str, min: usize, got: usize) -> Result<()> {
    if got < min {
        return Err(BlockCodeError::TooFewMessages { what, min, got });
    }
    Ok(())
}

/// Message 0 is `x_r^n`; messages `1..=num_ordinary` are i.i.d. `P_X*`.
pub fn build_special_message_code(
    w: &Dmc,
    n: usize,
    num_ordinary: usize,
    seed: u64,
) -> Result<Codebook> {
    check_n(n)?;
    check_count("ordinary", 1, num_ordinary)?;
    let cap = exponents::capacity(w, REFERENCE_TOL)?;
    let x_r = exponents::red_alert_from(w, &cap).letter;
    let cdf = rng::cdf_of(cap.input_dist.weights());
    let mut rng = rng::stream(seed, Domain::Codebook, 0);
    let mut codewords = vec![vec![x_r; n]];
    codewords.extend((0..num_ordinary).map(|_| iid_word(&cdf, n, &mut rng)));
    Ok(Codebook {
        n,
        codewords,
        special_set: vec![0],
        composition: None,
        typicality_radius: default_radius(n),
        scheme: Scheme::SpecialMessage {
            center: cap.output_dist.weights().to_vec(),
            x_r,
        },
    })
}

/// Special iff the output type is outside the `P_Y*` ball; otherwise ML among ordinaries.
pub fn decode_special_typicality(y: &[usize], cb: &Codebook, w: &Dmc) -> Result<DecodeOutcome> {
    cb.check_output(y, w)?;
    let Scheme::SpecialMessage { center, .. } = &cb.scheme else {
        return Err(BlockCodeError::WrongScheme);
    };
    if !in_sup_ball(&output_counts(y, w.outputs()), center, cb.typicality_radius) {
        return Ok(DecodeOutcome::Message(cb.special_set[0]));
    }
    Ok(DecodeOutcome::Message(
        ml::ml_among(cb.ordinary(), &cb.codewords, y, w).expect("ordinary messages exist"),
    ))
}

/// Messages `0..num_special` are fixed-composition rows near `P_X*`; the rest are i.i.d. `P_X*`.
///
/// Shell threshold is `E_sp(ln(num_special)/n + epsilon; P)` with `P` the realized composition.
pub fn build_two_stage_code(
    w: &Dmc,
    n: usize,
    num_special: usize,
    num_ordinary: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Codebook> {
    check_n(n)?;
    check_count("special", 1, num_special)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(BlockCodeError::BadEpsilon(epsilon));
    }
    let cap = exponents::capacity(w, REFERENCE_TOL)?;
    let counts = nearest_type(&cap.input_dist, n);
    let composition = Distribution::new(counts.iter().map(|&c| c as f64 / n as f64).collect())
        .expect("counts sum to n");
    let rate = (num_special as f64).ln() / n as f64;
    let threshold = exponents::sphere_packing_exponent(w, rate + epsilon, Some(&composition))?;
    let mut rng = rng::stream(seed, Domain::Codebook, 0);
    let mut codewords: Vec<Vec<usize>> = (0..num_special)
        .map(|_| fixed_composition_word(&counts, &mut rng))
        .collect();
    let cdf = rng::cdf_of(cap.input_dist.weights());
    let budget = RESAMPLE_BUDGET_PER_CODEWORD * num_ordinary.max(1);
    let mut redraws = 0;
    for _ in 0..num_ordinary {
        loop {
            let word = iid_word(&cdf, n, &mut rng);
            if !codewords[..num_special]
                .iter()
                .any(|s| expected_in_shell(w, s, &word, threshold))
            {
                codewords.push(word);
                break;
            }
            redraws += 1;
            if redraws > budget {
                return Err(BlockCodeError::ResampleBudget { attempts: redraws });
            }
        }
    }
    Ok(Codebook {
        n,
        codewords,
        special_set: (0..num_special).collect(),
        composition: Some(composition),
        typicality_radius: default_radius(n),
        scheme: Scheme::TwoStage {
            threshold,
            rate,
            epsilon,
        },
    })
}

/// Whether the mean conditional output law of `word`, read against `special`, lies in its shell.
fn expected_in_shell(w: &Dmc, special: &[usize], word: &[usize], threshold: f64) -> bool {
    let (nx, ny) = (w.inputs(), w.outputs());
    let pairs = ml::joint_counts(special, word, nx, nx);
    let mut total = 0.0;
    let n = special.len() as f64;
    for a in 0..nx {
        let n_a: u32 = pairs[a * nx..(a + 1) * nx].iter().sum();
        if n_a == 0 {
            continue;
        }
        let mut v = vec![0.0; ny];
        for c in 0..nx {
            let m = pairs[a * nx + c] as f64;
            for (vb, wb) in v.iter_mut().zip(w.row(c).weights()) {
                *vb += m * wb;
            }
        }
        for (b, vb) in v.iter().enumerate() {
            let q = vb / n_a as f64;
            if q > 0.0 {
                total += vb / n * (q / w.row(a).get(b)).ln();
            }
        }
    }
    total <= threshold + SHELL_SLACK
}

/// `D(V_{y|x} || W | P_x)` from the conditional type of `y` given `x`.
pub fn conditional_divergence(x: &[usize], y: &[usize], w: &Dmc) -> f64 {
    let (nx, ny) = (w.inputs(), w.outputs());
    let counts = ml::joint_counts(x, y, nx, ny);
    let n = x.len() as f64;
    let mut total = 0.0;
    for a in 0..nx {
        let row = &counts[a * ny..(a + 1) * ny];
        let n_a: u32 = row.iter().sum();
        for (b, &k) in row.iter().enumerate() {
            if k > 0 {
                let v = k as f64 / n_a as f64;
                total += k as f64 / n * (v / w.row(a).get(b)).ln();
            }
        }
    }
    total
}

/// Specials whose shell contains `y`.
pub fn shells_containing(y: &[usize], cb: &Codebook, w: &Dmc) -> Result<Vec<usize>> {
    cb.check_output(y, w)?;
    let Scheme::TwoStage { threshold, .. } = cb.scheme else {
        return Err(BlockCodeError::WrongScheme);
    };
    Ok(cb
        .special_set
        .iter()
        .copied()
        .filter(|&i| conditional_divergence(&cb.codewords[i], y, w) <= threshold + SHELL_SLACK)
        .collect())
}

/// Stage 1 picks the special branch iff `y` is in some shell; stage 2 is ML within the branch.
pub fn decode_two_stage(y: &[usize], cb: &Codebook, w: &Dmc) -> Result<DecodeOutcome> {
    let shells = shells_containing(y, cb, w)?;
    let pick = if shells.is_empty() {
        ml::ml_among(cb.ordinary(), &cb.codewords, y, w)
    } else {
        ml::ml_among(cb.special_set.iter().copied(), &cb.codewords, y, w)
    };
    // an empty ordinary set falls back to the specials
    Ok(DecodeOutcome::Message(pick.unwrap_or_else(|| {
        ml::ml_among(cb.special_set.iter().copied(), &cb.codewords, y, w).expect("nonempty")
    })))
}

/// As [`decode_two_stage`], but the special branch decodes `i` only when exactly one
/// special satisfies `ln P(y|x_i) - max_{j != i} ln P(y|x_j) >= n T`; otherwise erasure.
pub fn decode_two_stage_with_erasure(
    y: &[usize],
    cb: &Codebook,
    w: &Dmc,
    threshold: f64,
) -> Result<DecodeOutcome> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(BlockCodeError::BadThreshold(threshold));
    }
    let shells = shells_containing(y, cb, w)?;
    if shells.is_empty() && cb.ordinary().next().is_some() {
        return Ok(DecodeOutcome::Message(
            ml::ml_among(cb.ordinary(), &cb.codewords, y, w).expect("nonempty"),
        ));
    }
    let scores: Vec<(usize, f64)> = cb
        .special_set
        .iter()
        .map(|&i| (i, ml::log_likelihood(&cb.codewords[i], y, w)))
        .collect();
    let margin = cb.n as f64 * threshold - TIE_TOL;
    let winners: Vec<usize> = scores
        .iter()
        .filter(|(i, s)| {
            let rival = scores
                .iter()
                .filter(|(j, _)| j != i)
                .map(|(_, t)| *t)
                .fold(f64::NEG_INFINITY, f64::max);
            s - rival >= margin
        })
        .map(|(i, _)| *i)
        .collect();
    Ok(match winners.as_slice() {
        [i] => DecodeOutcome::Message(*i),
        _ => DecodeOutcome::Erasure,
    })
}

/// Message 0 is `x_fl^n`; the rest are fixed-composition rows near `P_X*`.
pub fn build_false_alarm_code(
    w: &Dmc,
    n: usize,
    num_ordinary: usize,
    seed: u64,
) -> Result<Codebook> {
    check_n(n)?;
    check_count("ordinary", 1, num_ordinary)?;
    let cap = exponents::capacity(w, REFERENCE_TOL)?;
    let x_fl = exponents::false_alarm_lower(w)?.letter;
    let counts = nearest_type(&cap.input_dist, n);
    let composition = Distribution::new(counts.iter().map(|&c| c as f64 / n as f64).collect())
        .expect("counts sum to n");
    let mut rng = rng::stream(seed, Domain::Codebook, 0);
    let mut codewords = vec![vec![x_fl; n]];
    codewords.extend((0..num_ordinary).map(|_| fixed_composition_word(&counts, &mut rng)));
    Ok(Codebook {
        n,
        codewords,
        special_set: vec![0],
        composition: Some(composition),
        typicality_radius: default_radius(n),
        scheme: Scheme::FalseAlarm {
            center: w.row(x_fl).weights().to_vec(),
            x_fl,
        },
    })
}

/// Special iff the output type is inside the ball around `W(.|x_fl)`; otherwise ML among ordinaries.
pub fn decode_false_alarm(y: &[usize], cb: &Codebook, w: &Dmc) -> Result<DecodeOutcome> {
    cb.check_output(y, w)?;
    let Scheme::FalseAlarm { center, .. } = &cb.scheme else {
        return Err(BlockCodeError::WrongScheme);
    };
    if in_sup_ball(&output_counts(y, w.outputs()), center, cb.typicality_radius) {
        return Ok(DecodeOutcome::Message(cb.special_set[0]));
    }
    Ok(DecodeOutcome::Message(
        ml::ml_among(cb.ordinary(), &cb.codewords, y, w).expect("ordinary messages exist"),
    ))
}

/// Dispatches on the codebook's scheme; two-stage codes use [`decode_two_stage`].
pub fn decode(y: &[usize], cb: &Codebook, w: &Dmc) -> Result<DecodeOutcome> {
    match cb.scheme {
        Scheme::SpecialMessage { .. } => decode_special_typicality(y, cb, w),
        Scheme::TwoStage { .. } => decode_two_stage(y, cb, w),
        Scheme::FalseAlarm { .. } => decode_false_alarm(y, cb, w),
    }
}
