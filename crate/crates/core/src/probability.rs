//! Finite-alphabet probability primitives.
//!
//! Everything here works in nats. Divergences follow the conventions
//! `0 ln 0 = 0` and `0 ln(0/q) = 0`; a positive mass against a zero mass is
//! reported as [`ProbabilityError::Unsupported`] rather than `+inf`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sums within this distance of one are accepted as-is.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Sums within this distance of one are renormalized; anything farther is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbabilityError {
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("weight {index} is not finite")]
    NotFinite { index: usize },
    #[error("weight {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("divergence undefined: reference mass is zero at {index} where the first argument is positive")]
    Unsupported { index: usize },
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("symbol {symbol} at position {position} is outside an alphabet of size {alphabet}")]
    SymbolOutOfRange {
        symbol: usize,
        position: usize,
        alphabet: usize,
    },
    #[error("conditional distribution has no rows")]
    NoRows,
}

pub type Result<T> = std::result::Result<T, ProbabilityError>;

/// A point on the probability simplex over `{0, .., len-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    weights: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(ProbabilityError::EmptyAlphabet);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(ProbabilityError::NotFinite { index });
            }
            if value < 0.0 {
                return Err(ProbabilityError::Negative { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        let deviation = (sum - 1.0).abs();
        if deviation <= SIMPLEX_TOL {
            Ok(Self { weights })
        } else if deviation <= RENORMALIZE_TOL {
            Ok(Self {
                weights: weights.into_iter().map(|w| w / sum).collect(),
            })
        } else {
            Err(ProbabilityError::NotNormalized { sum })
        }
    }

    /// Builds a distribution from nonnegative weights with arbitrary positive total.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 || !sum.is_finite() {
            return Err(ProbabilityError::NotNormalized { sum });
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(ProbabilityError::EmptyAlphabet);
        }
        Ok(Self {
            weights: vec![1.0 / len as f64; len],
        })
    }

    pub fn point_mass(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(ProbabilityError::SymbolOutOfRange {
                symbol: at,
                position: 0,
                alphabet: len,
            });
        }
        let mut weights = vec![0.0; len];
        weights[at] = 1.0;
        Ok(Self { weights })
    }

    pub(crate) fn from_raw_unchecked(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Distribution, alpha: f64) -> Result<Distribution> {
        check_same(self.len(), other.len())?;
        Distribution::new(
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                .collect(),
        )
    }

    /// Largest coordinate-wise absolute difference.
    pub fn sup_distance(&self, other: &Distribution) -> f64 {
        sup_distance(&self.weights, &other.weights)
    }

    /// Smallest index carrying positive mass, and the support size.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = ProbabilityError;
    fn try_from(value: Vec<f64>) -> Result<Self> {
        Distribution::new(value)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(value: Distribution) -> Self {
        value.weights
    }
}

/// A row-stochastic matrix: one output distribution per input letter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    rows: Vec<Distribution>,
}

impl ConditionalDistribution {
    pub fn new(rows: Vec<Distribution>) -> Result<Self> {
        let first = rows.first().ok_or(ProbabilityError::NoRows)?.len();
        for row in &rows {
            check_same(first, row.len())?;
        }
        Ok(Self { rows })
    }

    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            matrix
                .into_iter()
                .map(Distribution::new)
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &Distribution {
        &self.rows[i]
    }

    pub fn inputs(&self) -> usize {
        self.rows.len()
    }

    pub fn outputs(&self) -> usize {
        self.rows[0].len()
    }
}

/// Symbol counts of a finite sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmpiricalType {
    counts: Vec<u64>,
    length: u64,
}

impl EmpiricalType {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(ProbabilityError::EmptyAlphabet);
        }
        let length = counts.iter().sum();
        if length == 0 {
            return Err(ProbabilityError::EmptySequence);
        }
        Ok(Self { counts, length })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn to_distribution(&self) -> Distribution {
        let n = self.length as f64;
        Distribution::from_raw_unchecked(self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

/// Joint counts of an (input, output) sequence pair, indexed `[input][output]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalType {
    counts: Vec<Vec<u64>>,
    length: u64,
}

impl ConditionalType {
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn length(&self) -> u64 {
        self.length
    }

    /// Type of the conditioning (input) sequence.
    pub fn input_type(&self) -> EmpiricalType {
        EmpiricalType {
            counts: self.counts.iter().map(|r| r.iter().sum()).collect(),
            length: self.length,
        }
    }

    /// Empirical `V(.|a)`, or `None` when `a` never occurs in the input sequence.
    pub fn row(&self, a: usize) -> Option<Distribution> {
        let total: u64 = self.counts[a].iter().sum();
        (total > 0).then(|| {
            Distribution::from_raw_unchecked(
                self.counts[a]
                    .iter()
                    .map(|&c| c as f64 / total as f64)
                    .collect(),
            )
        })
    }

    /// `D(V || W | P)` where `V` is this conditional type and `P` the input type.
    pub fn divergence_from(&self, w: &ConditionalDistribution) -> Result<f64> {
        check_same(self.counts.len(), w.inputs())?;
        let n = self.length as f64;
        let mut acc = 0.0;
        for (a, row) in self.counts.iter().enumerate() {
            check_same(row.len(), w.outputs())?;
            let total: u64 = row.iter().sum();
            if total == 0 {
                continue;
            }
            let wr = w.row(a).weights();
            for (b, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                if wr[b] <= 0.0 {
                    return Err(ProbabilityError::Unsupported { index: b });
                }
                acc += c as f64 * (c as f64 / (total as f64 * wr[b])).ln();
            }
        }
        Ok(acc / n)
    }
}

fn check_same(left: usize, right: usize) -> Result<()> {
    if left != right {
        Err(ProbabilityError::AlphabetMismatch { left, right })
    } else {
        Ok(())
    }
}

pub(crate) fn sup_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Unchecked `D(p || q)`; terms with `p = 0` vanish, `q = 0 < p` yields `inf`.
pub(crate) fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            acc += a * (a / b).ln();
        }
    }
    acc.max(0.0)
}

pub(crate) fn marginal_raw(p: &[f64], rows: &[Distribution], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&pj, row) in p.iter().zip(rows) {
        if pj == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(row.weights()) {
            *o += pj * w;
        }
    }
}

/// `D(p || q) = sum_i p(i) ln(p(i)/q(i))`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_same(p.len(), q.len())?;
    let mut acc = 0.0;
    for (index, (&a, &b)) in p.weights.iter().zip(&q.weights).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(ProbabilityError::Unsupported { index });
            }
            acc += a * (a / b).ln();
        }
    }
    Ok(acc.max(0.0))
}

/// `D(V || W | P) = sum_i P(i) D(V(.|i) || W(.|i))`.
pub fn conditional_kl(
    v: &ConditionalDistribution,
    w: &ConditionalDistribution,
    p: &Distribution,
) -> Result<f64> {
    check_same(v.inputs(), w.inputs())?;
    check_same(v.outputs(), w.outputs())?;
    check_same(p.len(), v.inputs())?;
    let mut acc = 0.0;
    for (i, &pi) in p.weights.iter().enumerate() {
        if pi > 0.0 {
            acc += pi * kl_divergence(v.row(i), w.row(i))?;
        }
    }
    Ok(acc)
}

pub fn entropy(p: &Distribution) -> f64 {
    p.weights
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Output law `(PW)(y) = sum_x P(x) W(y|x)`.
pub fn output_marginal(p: &Distribution, w: &ConditionalDistribution) -> Result<Distribution> {
    check_same(p.len(), w.inputs())?;
    let mut out = vec![0.0; w.outputs()];
    marginal_raw(p.weights(), w.rows(), &mut out);
    let sum: f64 = out.iter().sum();
    Ok(Distribution::from_raw_unchecked(
        out.into_iter().map(|v| v / sum).collect(),
    ))
}

/// `I(P, W) = sum_{x,y} P(x) W(y|x) ln(W(y|x) / (PW)(y))`.
pub fn mutual_information(p: &Distribution, w: &ConditionalDistribution) -> Result<f64> {
    check_same(p.len(), w.inputs())?;
    Ok(mutual_information_raw(p.weights(), w.rows()))
}

pub(crate) fn mutual_information_raw(p: &[f64], rows: &[Distribution]) -> f64 {
    let mut q = vec![0.0; rows[0].len()];
    marginal_raw(p, rows, &mut q);
    let mut acc = 0.0;
    for (&pj, row) in p.iter().zip(rows) {
        if pj > 0.0 {
            acc += pj * kl_raw(row.weights(), &q);
        }
    }
    acc.max(0.0)
}

fn check_symbols(seq: &[usize], alphabet: usize) -> Result<()> {
    if let Some((position, &symbol)) = seq.iter().enumerate().find(|(_, &s)| s >= alphabet) {
        return Err(ProbabilityError::SymbolOutOfRange {
            symbol,
            position,
            alphabet,
        });
    }
    Ok(())
}

pub fn empirical_type(seq: &[usize], alphabet: usize) -> Result<EmpiricalType> {
    if seq.is_empty() {
        return Err(ProbabilityError::EmptySequence);
    }
    if alphabet == 0 {
        return Err(ProbabilityError::EmptyAlphabet);
    }
    check_symbols(seq, alphabet)?;
    let mut counts = vec![0u64; alphabet];
    for &s in seq {
        counts[s] += 1;
    }
    Ok(EmpiricalType {
        counts,
        length: seq.len() as u64,
    })
}

/// Conditional type of `y` given `x`.
pub fn conditional_type(
    y: &[usize],
    x: &[usize],
    input_alphabet: usize,
    output_alphabet: usize,
) -> Result<ConditionalType> {
    if y.len() != x.len() {
        return Err(ProbabilityError::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    if y.is_empty() {
        return Err(ProbabilityError::EmptySequence);
    }
    check_symbols(x, input_alphabet)?;
    check_symbols(y, output_alphabet)?;
    let mut counts = vec![vec![0u64; output_alphabet]; input_alphabet];
    for (&a, &b) in x.iter().zip(y) {
        counts[a][b] += 1;
    }
    Ok(ConditionalType {
        counts,
        length: y.len() as u64,
    })
}
