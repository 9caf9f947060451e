//! Exponents with closed forms in terms of single input letters.

use serde::{Deserialize, Serialize};

use super::{
    argmax_first, capacity, rate_grid, sphere_packing_exponent, CapacityResult, CurveKind,
    ExponentCurve, ExponentError, Result, REFERENCE_TOL,
};
use crate::channel::Dmc;
use crate::probability::kl_raw;

/// An exponent value together with the input letter that attains it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterExponent {
    pub value: f64,
    pub letter: usize,
}

/// `max_{a,d} D(W_a || W_d)` with its lexicographically smallest maximizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DMax {
    pub value: f64,
    pub x_a: usize,
    pub x_d: usize,
}

/// `E_r = max_x D(P_Y* || W_x)` with `P_Y*` from a capacity solve at [`REFERENCE_TOL`].
pub fn red_alert_exponent(w: &Dmc) -> Result<LetterExponent> {
    Ok(red_alert_from(w, &capacity(w, REFERENCE_TOL)?))
}

pub fn red_alert_from(w: &Dmc, cap: &CapacityResult) -> LetterExponent {
    let q = cap.output_dist.weights();
    let values: Vec<f64> = w.rows().iter().map(|r| kl_raw(q, r.weights())).collect();
    let letter = argmax_first(&values);
    LetterExponent {
        value: values[letter],
        letter,
    }
}

pub fn d_max(w: &Dmc) -> DMax {
    let n = w.inputs();
    let mut values = Vec::with_capacity(n * n);
    for a in 0..n {
        for d in 0..n {
            values.push(kl_raw(w.row(a).weights(), w.row(d).weights()));
        }
    }
    let best = argmax_first(&values);
    DMax {
        value: values[best],
        x_a: best / n,
        x_d: best % n,
    }
}

/// `E_fa_u = max_x sum_j P*(j) D(W_x || W_j)`.
pub fn false_alarm_upper(w: &Dmc) -> Result<LetterExponent> {
    let cap = capacity(w, REFERENCE_TOL)?;
    let p = cap.input_dist.weights();
    let values: Vec<f64> = w
        .rows()
        .iter()
        .map(|wi| {
            w.rows()
                .iter()
                .zip(p)
                .map(|(wj, pj)| pj * kl_raw(wi.weights(), wj.weights()))
                .sum()
        })
        .collect();
    let letter = argmax_first(&values);
    Ok(LetterExponent {
        value: values[letter],
        letter,
    })
}

/// Corner points `E_i = (1 - sum_{j<=i} r_j / C) E_r` of the layered region.
pub fn bit_layer_exponents(w: &Dmc, rates: &[f64]) -> Result<Vec<f64>> {
    let cap = capacity(w, REFERENCE_TOL)?;
    let er = red_alert_from(w, &cap).value;
    layer_corners(rates, cap.capacity, er)
}

pub(crate) fn layer_corners(rates: &[f64], c: f64, er: f64) -> Result<Vec<f64>> {
    if let Some(&bad) = rates.iter().find(|r| r.is_nan() || **r < 0.0) {
        return Err(ExponentError::NegativeRate(bad));
    }
    let sum: f64 = rates.iter().sum();
    // rates that sum to C within rounding are admissible
    if sum > c * (1.0 + 1e-12) + 1e-15 {
        return Err(ExponentError::RatesExceedCapacity { sum, capacity: c });
    }
    let mut cumulative = 0.0;
    Ok(rates
        .iter()
        .map(|r| {
            cumulative += r;
            if c > 0.0 {
                ((1.0 - cumulative / c) * er).max(0.0)
            } else {
                0.0
            }
        })
        .collect())
}

/// `min{E_r, (1 - r/C) D_max}` for `0 <= r < C`.
pub fn many_message_feedback_exponent(w: &Dmc, r: f64) -> Result<f64> {
    let cap = capacity(w, REFERENCE_TOL)?;
    let c = cap.capacity;
    if !(r >= 0.0 && r < c) {
        return Err(ExponentError::RateOutOfRange { rate: r, capacity: c });
    }
    let er = red_alert_from(w, &cap).value;
    Ok(er.min((1.0 - r / c) * d_max(w).value))
}

/// Rate `(1 - E_r / D_max) C` where the two branches of the many-message exponent meet.
pub fn many_message_feedback_knee(w: &Dmc) -> Result<f64> {
    let cap = capacity(w, REFERENCE_TOL)?;
    let dm = d_max(w).value;
    if dm == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 - red_alert_from(w, &cap).value / dm) * cap.capacity)
}

/// Line `(1 - r/C) D_max` on `points` rates spanning `[0, C]`.
pub fn burnashev_line(w: &Dmc, points: usize) -> Result<ExponentCurve> {
    check_points(points)?;
    let c = capacity(w, REFERENCE_TOL)?.capacity;
    let dm = d_max(w).value;
    let rates = dedup_grid(rate_grid(c, points, false));
    let values = rates.iter().map(|r| line(*r, c, dm)).collect();
    Ok(ExponentCurve::new(CurveKind::BurnashevLine, rates, values))
}

/// `min{E_r, (1 - r/C) D_max}` on `[0, C]` with the knee inserted.
pub(crate) fn many_message_curve(w: &Dmc, points: usize) -> Result<ExponentCurve> {
    check_points(points)?;
    let cap = capacity(w, REFERENCE_TOL)?;
    let c = cap.capacity;
    let er = red_alert_from(w, &cap).value;
    let dm = d_max(w).value;
    let mut rates = rate_grid(c, points, false);
    if dm > 0.0 {
        rates.push((1.0 - er / dm) * c);
    }
    let rates = dedup_grid(rates);
    let values = rates.iter().map(|r| er.min(line(*r, c, dm))).collect();
    Ok(ExponentCurve::new(
        CurveKind::ManyMessageFeedback,
        rates,
        values,
    ))
}

/// Single-layer line `(1 - r/C) E_r` on `[0, C]`.
pub(crate) fn bit_layer_line(w: &Dmc, points: usize) -> Result<ExponentCurve> {
    check_points(points)?;
    let cap = capacity(w, REFERENCE_TOL)?;
    let c = cap.capacity;
    let er = red_alert_from(w, &cap).value;
    let rates = dedup_grid(rate_grid(c, points, false));
    let values = rates.iter().map(|r| line(*r, c, er)).collect();
    Ok(ExponentCurve::new(CurveKind::BitLayers, rates, values))
}

/// Corner points of the layered region against cumulative rate.
pub(crate) fn bit_layer_curve(w: &Dmc, layer_rates: &[f64]) -> Result<ExponentCurve> {
    let values = bit_layer_exponents(w, layer_rates)?;
    let mut cumulative = 0.0;
    let rates: Vec<f64> = layer_rates
        .iter()
        .map(|r| {
            cumulative += r;
            cumulative
        })
        .collect();
    if rates.windows(2).any(|p| p[0] >= p[1]) {
        return Err(ExponentError::NonIncreasingRates);
    }
    Ok(ExponentCurve::new(CurveKind::BitLayers, rates, values))
}

/// `E_sp(r)` on a grid, defined only for symmetric channels.
pub fn erasure_md_curve(w: &Dmc, grid: &[f64]) -> Result<ExponentCurve> {
    if !w.is_symmetric()? {
        return Err(ExponentError::AsymmetricChannel);
    }
    let c = capacity(w, REFERENCE_TOL)?.capacity;
    let rates = dedup_grid(grid.to_vec());
    let values = rates
        .iter()
        .map(|&r| {
            if r >= c {
                Ok(0.0)
            } else {
                sphere_packing_exponent(w, r, None)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ExponentCurve::new(CurveKind::ErasureMd, rates, values))
}

fn line(r: f64, c: f64, top: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    ((1.0 - r / c) * top).max(0.0)
}

fn check_points(points: usize) -> Result<()> {
    if points < 2 {
        return Err(ExponentError::GridTooSmall { min: 2, got: points });
    }
    Ok(())
}

/// Sorts and removes duplicate rates.
pub(crate) fn dedup_grid(mut rates: Vec<f64>) -> Vec<f64> {
    rates.sort_by(f64::total_cmp);
    rates.dedup_by(|a, b| a == b);
    rates
}
