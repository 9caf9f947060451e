//! Exact probabilities of output-type regions under i.i.d. sampling.
//!
//! `P(type(Y^n) in R) = sum_{k in R} n! / prod k_y! * prod p_y^{k_y}`, summed over
//! every composition `k` of `n` in log space. Work is split by the first count;
//! per-chunk partial sums are merged in chunk order so the result does not
//! depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;
use crate::exponents::{self, ExponentError, REFERENCE_TOL};
use crate::probability::Distribution;

/// Upper limit on the number of enumerated output types.
pub const TYPE_BUDGET: u128 = 10_000_000;

/// Slack added to sup-norm ball membership so boundary types are kept.
pub const BALL_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("{types} output types exceed the budget of {budget}")]
    TypeBudget { types: u128, budget: u128 },
    #[error("block length must be positive")]
    ZeroLength,
    #[error("radius must be nonnegative and finite, got {0}")]
    BadRadius(f64),
    #[error("distribution has {got} letters, expected {expected}")]
    AlphabetMismatch { expected: usize, got: usize },
    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("fit inputs have different lengths ({ns} lengths, {probs} probabilities)")]
    LengthMismatch { ns: usize, probs: usize },
    #[error("probability at index {index} is {value}, outside (0, 1)")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("block lengths must not all be equal")]
    DegenerateLadder,
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

pub type Result<T> = std::result::Result<T, ExactError>;

/// A region probability with its logarithm, which stays finite when the probability underflows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionProbability {
    pub probability: f64,
    pub ln_probability: f64,
    pub types: u64,
}

impl RegionProbability {
    /// `-ln(p) / n`.
    pub fn exponent(&self, n: u64) -> f64 {
        -self.ln_probability / n as f64
    }
}

/// Number of compositions of `n` into `parts` nonnegative parts.
pub fn type_count(n: u64, parts: usize) -> u128 {
    let mut count: u128 = 1;
    for i in 1..parts as u128 {
        count = count * (n as u128 + i) / i;
    }
    count
}

/// `ln k!` for `k = 0..=n`, accumulated with compensated summation.
pub fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    table.push(0.0);
    for k in 1..=n {
        let y = (k as f64).ln() - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
        table.push(sum);
    }
    table
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    const EMPTY: LogSum = LogSum {
        max: f64::NEG_INFINITY,
        scaled: 0.0,
    };

    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    fn merge(&mut self, other: LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    fn ln(self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `P(type(Y^n) in region)` for `Y` i.i.d. `row`; `region` receives the count vector.
pub fn exact_region_prob<F>(row: &Distribution, n: u64, region: F) -> Result<RegionProbability>
where
    F: Fn(&[u64]) -> bool + Sync,
{
    if n == 0 {
        return Err(ExactError::ZeroLength);
    }
    let parts = row.len();
    let types = type_count(n, parts);
    if types > TYPE_BUDGET {
        return Err(ExactError::TypeBudget {
            types,
            budget: TYPE_BUDGET,
        });
    }
    let lnf = ln_factorials(n);
    let ln_p: Vec<f64> = row.weights().iter().map(|p| p.ln()).collect();
    let chunks: Vec<LogSum> = (0..=n)
        .into_par_iter()
        .map(|lead| {
            let mut acc = LogSum::EMPTY;
            let mut counts = vec![0u64; parts];
            counts[0] = lead;
            visit_tail(&mut counts, 1, n - lead, &mut |k| {
                if region(k) {
                    acc.add(ln_multinomial(k, &lnf, &ln_p));
                }
            });
            acc
        })
        .collect();
    let mut total = LogSum::EMPTY;
    for c in chunks {
        total.merge(c);
    }
    let ln_probability = total.ln().min(0.0);
    Ok(RegionProbability {
        probability: ln_probability.exp(),
        ln_probability,
        types: types as u64,
    })
}

fn visit_tail(counts: &mut [u64], slot: usize, left: u64, f: &mut impl FnMut(&[u64])) {
    if slot == counts.len() {
        if left == 0 {
            f(counts);
        }
        return;
    }
    if slot + 1 == counts.len() {
        counts[slot] = left;
        f(counts);
        return;
    }
    for c in 0..=left {
        counts[slot] = c;
        visit_tail(counts, slot + 1, left - c, f);
    }
}

fn ln_multinomial(k: &[u64], lnf: &[f64], ln_p: &[f64]) -> f64 {
    let n: u64 = k.iter().sum();
    let mut v = lnf[n as usize];
    for (&c, &lp) in k.iter().zip(ln_p) {
        if c > 0 {
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            v += c as f64 * lp - lnf[c as usize];
        }
    }
    v
}

/// Sup-norm ball membership `|k_y - n c_y| <= n radius` for every `y`, with [`BALL_SLACK`].
pub fn in_sup_ball(counts: &[u64], center: &[f64], radius: f64) -> bool {
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    counts
        .iter()
        .zip(center)
        .all(|(&k, &c)| (k as f64 - n * c).abs() <= n * radius + BALL_SLACK)
}

fn check_radius(delta: f64) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(ExactError::BadRadius(delta));
    }
    Ok(())
}

/// Probability that the output of the red-alert codeword lands in the
/// `delta`-ball around `P_Y*`, the special message's missed-detection event.
pub fn exact_missed_detection(w: &Dmc, n: u64, delta: f64) -> Result<RegionProbability> {
    check_radius(delta)?;
    let cap = exponents::capacity(w, REFERENCE_TOL)?;
    let x_r = exponents::red_alert_from(w, &cap).letter;
    let center = cap.output_dist.weights().to_vec();
    exact_region_prob(w.row(x_r), n, |k| in_sup_ball(k, &center, delta))
}

/// Probability that an output drawn from `ordinary_row` lands in the
/// `delta`-ball around `W(.|x_fl)`, the false-alarm event.
pub fn exact_false_alarm(
    w: &Dmc,
    n: u64,
    delta: f64,
    ordinary_row: &Distribution,
) -> Result<RegionProbability> {
    check_radius(delta)?;
    if ordinary_row.len() != w.outputs() {
        return Err(ExactError::AlphabetMismatch {
            expected: w.outputs(),
            got: ordinary_row.len(),
        });
    }
    let x_fl = exponents::false_alarm_lower(w)?.letter;
    let center = w.row(x_fl).weights().to_vec();
    exact_region_prob(ordinary_row, n, |k| in_sup_ball(k, &center, delta))
}

/// Least-squares fit of `-ln p` against `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope; zero with three points on a line.
    pub stderr: f64,
}

/// Fits `-ln p(n) = slope * n + intercept`; every probability must lie in `(0, 1)`.
pub fn fit_exponent(ns: &[u64], probs: &[f64]) -> Result<ExponentFit> {
    if ns.len() != probs.len() {
        return Err(ExactError::LengthMismatch {
            ns: ns.len(),
            probs: probs.len(),
        });
    }
    for (index, &value) in probs.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(ExactError::ProbabilityOutOfRange { index, value });
        }
    }
    let ln: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    fit_log_exponent(ns, &ln)
}

/// As [`fit_exponent`], taking `ln p` so that underflowing probabilities can be fitted.
pub fn fit_log_exponent(ns: &[u64], ln_probs: &[f64]) -> Result<ExponentFit> {
    if ns.len() != ln_probs.len() {
        return Err(ExactError::LengthMismatch {
            ns: ns.len(),
            probs: ln_probs.len(),
        });
    }
    if ns.len() < 3 {
        return Err(ExactError::TooFewPoints(ns.len()));
    }
    for (index, &value) in ln_probs.iter().enumerate() {
        if !(value < 0.0 && value.is_finite()) {
            return Err(ExactError::ProbabilityOutOfRange {
                index,
                value: value.exp(),
            });
        }
    }
    let m = ns.len() as f64;
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = ln_probs.iter().map(|l| -l).collect();
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ExactError::DegenerateLadder);
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let stderr = (ss_res / (m - 2.0) / sxx).sqrt();
    Ok(ExponentFit {
        slope,
        intercept,
        r2,
        stderr,
    })
}
