//! Exponents and exponent curves of a DMC, all in nats.
//!
//! Every optimizer here is deterministic and breaks ties toward the smallest
//! input index (lexicographic for pairs).

mod capacity;
mod false_alarm;
mod fcurve;
mod letters;
mod sphere_packing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use capacity::{capacity, CapacityResult, DEFAULT_CAPACITY_TOL, MAX_CAPACITY_ITERATIONS};
pub use false_alarm::{false_alarm_lower, false_alarm_lower_at, FalseAlarmPoint};
pub use fcurve::{f_curve, f_curve_with, FCurve};
pub use letters::{
    bit_layer_exponents, burnashev_line, d_max, erasure_md_curve, false_alarm_upper,
    many_message_feedback_exponent, many_message_feedback_knee, red_alert_exponent,
    red_alert_from, DMax, LetterExponent,
};
pub use sphere_packing::{
    sphere_packing_curve, sphere_packing_exponent, sphere_packing_for_input, SpherePackingPoint,
};

/// Internal capacity tolerance used by derived exponents.
pub const REFERENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("Blahut-Arimoto did not reach gap {tol} within {iterations} iterations (gap {gap})")]
    NotConverged { tol: f64, iterations: usize, gap: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("rate {rate} is outside [0, {capacity})")]
    RateOutOfRange { rate: f64, capacity: f64 },
    #[error("layer rates sum to {sum}, above capacity {capacity}")]
    RatesExceedCapacity { sum: f64, capacity: f64 },
    #[error("negative rate {0}")]
    NegativeRate(f64),
    #[error("curve rates must be strictly increasing")]
    NonIncreasingRates,
    #[error("grid needs at least {min} points, got {got}")]
    GridTooSmall { min: usize, got: usize },
    #[error("channel is not symmetric")]
    AsymmetricChannel,
    #[error("input distribution has {got} letters, channel has {expected}")]
    InputMismatch { expected: usize, got: usize },
    #[error("curve endpoint check failed: {what} = {got}, expected {expected}")]
    EndpointCheck {
        what: &'static str,
        got: f64,
        expected: f64,
    },
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
}

pub type Result<T> = std::result::Result<T, ExponentError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    SpherePacking,
    FOfR,
    BitLayers,
    ManyMessageFeedback,
    ErasureMd,
    BurnashevLine,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::SpherePacking => "sphere_packing",
            CurveKind::FOfR => "f_of_r",
            CurveKind::BitLayers => "bit_layers",
            CurveKind::ManyMessageFeedback => "many_message_feedback",
            CurveKind::ErasureMd => "erasure_md",
            CurveKind::BurnashevLine => "burnashev_line",
        }
    }
}

impl std::str::FromStr for CurveKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "sphere_packing" => CurveKind::SpherePacking,
            "f_of_r" => CurveKind::FOfR,
            "bit_layers" => CurveKind::BitLayers,
            "many_message_feedback" => CurveKind::ManyMessageFeedback,
            "erasure_md" => CurveKind::ErasureMd,
            "burnashev_line" => CurveKind::BurnashevLine,
            other => return Err(format!("unknown curve kind '{other}'")),
        })
    }
}

/// Sampled exponent curve; rates strictly increasing, values finite and nonnegative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentCurve {
    pub kind: CurveKind,
    pub rates: Vec<f64>,
    pub values: Vec<f64>,
}

impl ExponentCurve {
    pub(crate) fn new(kind: CurveKind, rates: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(rates.len(), values.len());
        debug_assert!(rates.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self {
            kind,
            rates,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rates.iter().copied().zip(self.values.iter().copied())
    }
}

/// Index of the first value within a relative `1e-12` of the maximum.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-12 * best.abs().max(1.0);
    values
        .iter()
        .position(|&v| v >= best - slack)
        .expect("nonempty")
}

/// `count` evenly spaced points on `[0, top]`, or `[0, top)` when `open`.
pub(crate) fn rate_grid(top: f64, count: usize, open: bool) -> Vec<f64> {
    let denom = if open { count } else { count - 1 } as f64;
    (0..count).map(|i| top * i as f64 / denom).collect()
}

/// Samples a curve of the given kind on `points` rates spanning `[0, C]`.
///
/// For [`CurveKind::BitLayers`], `layer_rates` selects the region corners at the
/// cumulative layer rates; without it the single-layer line is traced.
pub fn curve(
    w: &crate::channel::Dmc,
    kind: CurveKind,
    points: usize,
    layer_rates: Option<&[f64]>,
) -> Result<ExponentCurve> {
    match kind {
        CurveKind::SpherePacking => sphere_packing_curve(w, points),
        CurveKind::FOfR => f_curve(w, points),
        CurveKind::BitLayers => match layer_rates {
            Some(rates) => letters::bit_layer_curve(w, rates),
            None => letters::bit_layer_line(w, points),
        },
        CurveKind::ManyMessageFeedback => letters::many_message_curve(w, points),
        CurveKind::ErasureMd => {
            if points < 2 {
                return Err(ExponentError::GridTooSmall { min: 2, got: points });
            }
            let c = capacity(w, REFERENCE_TOL)?.capacity;
            erasure_md_curve(w, &rate_grid(c, points, false))
        }
        CurveKind::BurnashevLine => burnashev_line(w, points),
    }
}

/// Every scalar exponent of a channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub capacity: CapacityResult,
    pub red_alert: LetterExponent,
    pub d_max: DMax,
    pub false_alarm_lower: LetterExponent,
    pub false_alarm_upper: LetterExponent,
}

pub fn exponent_report(w: &crate::channel::Dmc, tol: f64) -> Result<ExponentReport> {
    let reference = capacity(w, REFERENCE_TOL.min(tol))?;
    let fal = false_alarm::false_alarm_lower_from(w, &reference);
    Ok(ExponentReport {
        capacity: capacity(w, tol)?,
        red_alert: red_alert_from(w, &reference),
        d_max: d_max(w),
        false_alarm_lower: LetterExponent {
            value: fal.value,
            letter: fal.letter,
        },
        false_alarm_upper: false_alarm_upper(w)?,
    })
}
