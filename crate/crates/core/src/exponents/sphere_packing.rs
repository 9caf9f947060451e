//! Sphere-packing exponent `E_sp(r; P) = min { D(V || W | P) : I(P, V) <= r }`.
//!
//! For a multiplier `lambda` in `[0, 1)` the minimizer of
//! `D(V || W | P) + lambda / (1 - lambda) * I(P, V)` is the fixed point of
//! `V_x ∝ W_x^{1-lambda} Q^lambda`, `Q = PV`. `I(P, V_lambda)` decreases from
//! `I(P, W)` to `0` along this path, so the constrained optimum is found by
//! bisecting on `lambda`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::letters::dedup_grid;
use super::{capacity, rate_grid, CurveKind, ExponentCurve, ExponentError, Result, REFERENCE_TOL};
use crate::channel::Dmc;
use crate::probability::{kl_raw, ConditionalDistribution, Distribution};

const FIXED_POINT_TOL: f64 = 1e-15;
const MAX_FIXED_POINT_ITERATIONS: usize = 200_000;
const BISECTION_STEPS: usize = 200;
const MAX_GRID_POINTS: usize = 240;
const PATTERN_FLOOR: f64 = 1e-9;

/// Minimizer of the fixed-input problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpherePackingPoint {
    pub value: f64,
    /// `I(P, V)` at the returned minimizer.
    pub rate: f64,
    pub input: Distribution,
    pub channel: ConditionalDistribution,
}

/// `E_sp(r; P)`; zero when `r >= I(P, W)`.
pub fn sphere_packing_for_input(w: &Dmc, r: f64, p: &Distribution) -> Result<SpherePackingPoint> {
    if r.is_nan() || r < 0.0 {
        return Err(ExponentError::NegativeRate(r));
    }
    if p.len() != w.inputs() {
        return Err(ExponentError::InputMismatch {
            expected: w.inputs(),
            got: p.len(),
        });
    }
    let (value, rate, v) = Path::new(w, p.weights()).solve(r);
    Ok(SpherePackingPoint {
        value,
        rate,
        input: p.clone(),
        channel: ConditionalDistribution::new(
            v.into_iter().map(Distribution::from_raw_unchecked).collect(),
        )
        .expect("rows are normalized"),
    })
}

/// `E_sp(r; P)` for the given input law, or `max_P E_sp(r; P)` when `p` is `None`.
///
/// Without `p` the rate must lie in `[0, C)`.
pub fn sphere_packing_exponent(w: &Dmc, r: f64, p: Option<&Distribution>) -> Result<f64> {
    if let Some(p) = p {
        return Ok(sphere_packing_for_input(w, r, p)?.value);
    }
    let c = capacity(w, REFERENCE_TOL)?.capacity;
    if !(r >= 0.0 && r < c) {
        return Err(ExponentError::RateOutOfRange { rate: r, capacity: c });
    }
    Ok(maximize_over_inputs(w, r))
}

/// `E_sp(r)` on `points` rates spanning `[0, C]`; the endpoint `C` maps to zero.
pub fn sphere_packing_curve(w: &Dmc, points: usize) -> Result<ExponentCurve> {
    if points < 2 {
        return Err(ExponentError::GridTooSmall { min: 2, got: points });
    }
    let c = capacity(w, REFERENCE_TOL)?.capacity;
    let rates = dedup_grid(rate_grid(c, points, false));
    let values = rates
        .par_iter()
        .map(|&r| if r >= c { 0.0 } else { maximize_over_inputs(w, r) })
        .collect();
    Ok(ExponentCurve::new(CurveKind::SpherePacking, rates, values))
}

fn maximize_over_inputs(w: &Dmc, r: f64) -> f64 {
    let objective = |p: &[f64]| Path::new(w, p).solve(r).0;
    maximize_on_simplex(w.inputs(), objective)
}

/// Grid search over the simplex followed by pairwise mass-transfer pattern search.
pub(crate) fn maximize_on_simplex(dim: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut resolution = 1;
    while simplex_count(resolution + 1, dim) <= MAX_GRID_POINTS {
        resolution += 1;
    }
    let mut best_p = vec![0.0; dim];
    let mut best = f64::NEG_INFINITY;
    for_each_composition(resolution, dim, &mut |counts| {
        let p: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / resolution as f64)
            .collect();
        let v = f(&p);
        if v > best {
            best = v;
            best_p = p;
        }
    });
    let mut step = 1.0 / resolution as f64;
    while step >= PATTERN_FLOOR {
        let mut improved = false;
        for from in 0..dim {
            for to in 0..dim {
                if from == to || best_p[from] <= 0.0 {
                    continue;
                }
                let moved = step.min(best_p[from]);
                let mut p = best_p.clone();
                p[from] -= moved;
                p[to] += moved;
                let v = f(&p);
                if v > best {
                    best = v;
                    best_p = p;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

fn simplex_count(resolution: usize, dim: usize) -> usize {
    // C(resolution + dim - 1, dim - 1)
    let mut count = 1usize;
    for i in 1..dim {
        count = count.saturating_mul(resolution + i) / i;
    }
    count
}

/// Calls `visit` for every vector of `dim` nonnegative integers summing to `total`.
pub(crate) fn for_each_composition(total: usize, dim: usize, visit: &mut impl FnMut(&[usize])) {
    fn recurse(
        slot: usize,
        left: usize,
        counts: &mut [usize],
        visit: &mut impl FnMut(&[usize]),
    ) {
        if slot + 1 == counts.len() {
            counts[slot] = left;
            visit(counts);
            return;
        }
        for c in 0..=left {
            counts[slot] = c;
            recurse(slot + 1, left - c, counts, visit);
        }
    }
    let mut counts = vec![0; dim];
    recurse(0, total, &mut counts, visit);
}

/// The `lambda`-parametrized family of minimizers for a fixed input law.
struct Path<'a> {
    w: &'a Dmc,
    p: &'a [f64],
}

impl<'a> Path<'a> {
    fn new(w: &'a Dmc, p: &'a [f64]) -> Self {
        Self { w, p }
    }

    /// Returns `(E_sp(r; P), I(P, V*), V*)`.
    fn solve(&self, r: f64) -> (f64, f64, Vec<Vec<f64>>) {
        let rows: Vec<Vec<f64>> = self.w.rows().iter().map(|d| d.weights().to_vec()).collect();
        let full = self.information(&rows);
        if r >= full {
            return (0.0, full, rows);
        }
        if r == 0.0 {
            return self.zero_rate();
        }
        let mut q = vec![0.0; self.w.outputs()];
        crate::probability::marginal_raw(self.p, self.w.rows(), &mut q);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut best = (0.0, full, rows);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.fixed_point(mid, &mut q);
            let info = self.information(&v);
            if info > r {
                lo = mid;
            } else {
                hi = mid;
                best = (self.divergence(&v), info, v);
                if r - info <= 1e-14 {
                    break;
                }
            }
        }
        best
    }

    /// Closed form at `r = 0`: `V_x = Q ∝ exp(sum_x P(x) ln W_x)`.
    fn zero_rate(&self) -> (f64, f64, Vec<Vec<f64>>) {
        let ny = self.w.outputs();
        let logs = self.w.log_table();
        let mut g: Vec<f64> = (0..ny)
            .map(|y| {
                self.p
                    .iter()
                    .zip(logs)
                    .map(|(px, lx)| px * lx[y])
                    .sum::<f64>()
                    .exp()
            })
            .collect();
        let z: f64 = g.iter().sum();
        g.iter_mut().for_each(|v| *v /= z);
        (-z.ln(), 0.0, vec![g; self.w.inputs()])
    }

    fn fixed_point(&self, lambda: f64, q: &mut [f64]) -> Vec<Vec<f64>> {
        let logs = self.w.log_table();
        let ny = q.len();
        let mut v = vec![vec![0.0; ny]; self.p.len()];
        let mut next = vec![0.0; ny];
        for _ in 0..MAX_FIXED_POINT_ITERATIONS {
            self.tilt(lambda, q, logs, &mut v);
            next.iter_mut().for_each(|n| *n = 0.0);
            for (px, vx) in self.p.iter().zip(&v) {
                for (n, vy) in next.iter_mut().zip(vx) {
                    *n += px * vy;
                }
            }
            let delta = crate::probability::sup_distance(q, &next);
            q.copy_from_slice(&next);
            if delta <= FIXED_POINT_TOL {
                break;
            }
        }
        self.tilt(lambda, q, logs, &mut v);
        v
    }

    fn tilt(&self, lambda: f64, q: &[f64], logs: &[Vec<f64>], v: &mut [Vec<f64>]) {
        for (vx, lx) in v.iter_mut().zip(logs) {
            let mut top = f64::NEG_INFINITY;
            for ((out, l), qy) in vx.iter_mut().zip(lx).zip(q) {
                *out = (1.0 - lambda) * l + lambda * qy.ln();
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

    fn information(&self, v: &[Vec<f64>]) -> f64 {
        let ny = self.w.outputs();
        let mut q = vec![0.0; ny];
        for (px, vx) in self.p.iter().zip(v) {
            for (qy, vy) in q.iter_mut().zip(vx) {
                *qy += px * vy;
            }
        }
        self.p
            .iter()
            .zip(v)
            .filter(|(px, _)| **px > 0.0)
            .map(|(px, vx)| px * kl_raw(vx, &q))
            .sum::<f64>()
            .max(0.0)
    }

    fn divergence(&self, v: &[Vec<f64>]) -> f64 {
        self.p
            .iter()
            .zip(v)
            .zip(self.w.rows())
            .filter(|((px, _), _)| **px > 0.0)
            .map(|((px, vx), wx)| px * kl_raw(vx, wx.weights()))
            .sum::<f64>()
            .max(0.0)
    }
}
