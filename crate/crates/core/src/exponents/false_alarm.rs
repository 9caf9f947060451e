//! False-alarm lower bound
//! `E_fa_l = max_i min { D(V || W | P*) : (P* V)_Y = W_i }`.
//!
//! The inner problem is an I-projection of the joint law `P*(x) W(y|x)` onto
//! joints with input marginal `P*` and output marginal `W_i`. Its minimizer has
//! the form `V_x(y) = W_x(y) e^{mu_y} / Z_x`; iterative proportional fitting on
//! `mu` converges to it.

use serde::{Deserialize, Serialize};

use super::{argmax_first, capacity, CapacityResult, Result, REFERENCE_TOL};
use crate::channel::Dmc;
use crate::probability::kl_raw;

const MARGINAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalseAlarmPoint {
    pub value: f64,
    pub letter: usize,
    /// Inner minimum for every target letter.
    pub per_letter: Vec<f64>,
}

pub fn false_alarm_lower(w: &Dmc) -> Result<FalseAlarmPoint> {
    let cap = capacity(w, REFERENCE_TOL)?;
    Ok(false_alarm_lower_from(w, &cap))
}

pub(crate) fn false_alarm_lower_from(w: &Dmc, cap: &CapacityResult) -> FalseAlarmPoint {
    let p = cap.input_dist.weights();
    let per_letter: Vec<f64> = (0..w.inputs())
        .map(|i| project(w, p, w.row(i).weights()))
        .collect();
    let letter = argmax_first(&per_letter);
    FalseAlarmPoint {
        value: per_letter[letter],
        letter,
        per_letter,
    }
}

/// Inner minimum for a single target output law `target`.
pub fn false_alarm_lower_at(w: &Dmc, p: &[f64], target: &[f64]) -> f64 {
    project(w, p, target)
}

fn project(w: &Dmc, p: &[f64], target: &[f64]) -> f64 {
    let ny = w.outputs();
    let logs = w.log_table();
    let mut mu = vec![0.0; ny];
    let mut v = vec![vec![0.0; ny]; p.len()];
    let mut m = vec![0.0; ny];
    for _ in 0..MAX_SWEEPS {
        tilt(logs, &mu, &mut v);
        m.iter_mut().for_each(|x| *x = 0.0);
        for (px, vx) in p.iter().zip(&v) {
            for (my, vy) in m.iter_mut().zip(vx) {
                *my += px * vy;
            }
        }
        let err = crate::probability::sup_distance(&m, target);
        if err <= MARGINAL_TOL {
            break;
        }
        for ((u, t), my) in mu.iter_mut().zip(target).zip(&m) {
            *u += (t / my).ln();
        }
    }
    p.iter()
        .zip(&v)
        .zip(w.rows())
        .filter(|((px, _), _)| **px > 0.0)
        .map(|((px, vx), wx)| px * kl_raw(vx, wx.weights()))
        .sum::<f64>()
        .max(0.0)
}

fn tilt(logs: &[Vec<f64>], mu: &[f64], v: &mut [Vec<f64>]) {
    for (vx, lx) in v.iter_mut().zip(logs) {
        let mut top = f64::NEG_INFINITY;
        for ((out, l), u) in vx.iter_mut().zip(lx).zip(mu) {
            *out = l + u;
            top = top.max(*out);
        }
        let mut z = 0.0;
        for out in vx.iter_mut() {
            *out = (*out - top).exp();
            z += *out;
        }
        vx.iter_mut().for_each(|o| *o /= z);
    }
}
