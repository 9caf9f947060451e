use serde::{Deserialize, Serialize};

use super::{ExponentError, Result};
use crate::channel::Dmc;
use crate::probability::{kl_raw, marginal_raw, Distribution};

pub const DEFAULT_CAPACITY_TOL: f64 = 1e-9;
pub const MAX_CAPACITY_ITERATIONS: usize = 100_000;

/// Capacity with its optimizing input/output laws and a certified gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// `I(P_X*, W)` for the returned input law.
    pub capacity: f64,
    pub input_dist: Distribution,
    pub output_dist: Distribution,
    pub iterations: usize,
    /// `max_x D(W(.|x) || P_Y*) - capacity`, an upper bound on the true error.
    pub gap: f64,
}

impl CapacityResult {
    /// Upper bound on capacity from the KKT conditions.
    pub fn upper_bound(&self) -> f64 {
        self.capacity + self.gap
    }
}

/// Blahut-Arimoto iteration, stopped when `max_x D(W_x || PW) - I(P, W) <= tol`.
pub fn capacity(w: &Dmc, tol: f64) -> Result<CapacityResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(ExponentError::BadTolerance(tol));
    }
    let nx = w.inputs();
    let rows = w.rows();
    let mut p = vec![1.0 / nx as f64; nx];
    let mut q = vec![0.0; w.outputs()];
    let mut d = vec![0.0; nx];
    let mut gap = f64::INFINITY;
    for iteration in 0..=MAX_CAPACITY_ITERATIONS {
        marginal_raw(&p, rows, &mut q);
        for (dx, row) in d.iter_mut().zip(rows) {
            *dx = kl_raw(row.weights(), &q);
        }
        let info: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gap = (upper - info).max(0.0);
        if gap <= tol {
            let qsum: f64 = q.iter().sum();
            return Ok(CapacityResult {
                capacity: info.max(0.0),
                input_dist: Distribution::from_raw_unchecked(p),
                output_dist: Distribution::from_raw_unchecked(q.iter().map(|v| v / qsum).collect()),
                iterations: iteration,
                gap,
            });
        }
        // p(x) <- p(x) exp(D(W_x || q)) / Z, shifted by the max for stability
        let mut z = 0.0;
        for (px, dx) in p.iter_mut().zip(&d) {
            *px *= (dx - upper).exp();
            z += *px;
        }
        p.iter_mut().for_each(|v| *v /= z);
    }
    Err(ExponentError::NotConverged {
        tol,
        iterations: MAX_CAPACITY_ITERATIONS,
        gap,
    })
}
