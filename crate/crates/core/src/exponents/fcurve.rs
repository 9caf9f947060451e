//! The single-message missed-detection exponent `F(R)` at rate `R`.
//!
//! `F(R) = max alpha D(P1 W || W_x1) + (1 - alpha) D(P2 W || W_x2)` subject to
//! `alpha I(P1, W) + (1 - alpha) I(P2, W) >= R`. This is the upper concave
//! envelope of the point cloud `{(I(P, W), max_x D(PW || W_x))}`, evaluated on a
//! rate grid; the envelope peaks at `R = 0` so it is nonincreasing.

use serde::{Deserialize, Serialize};

use super::sphere_packing::for_each_composition;
use super::{
    capacity, d_max, rate_grid, red_alert_from, CurveKind, ExponentCurve, ExponentError, Result,
    REFERENCE_TOL,
};
use crate::channel::Dmc;
use crate::probability::{kl_raw, marginal_raw, mutual_information_raw};

pub const MIN_F_GRID: usize = 16;
const ENDPOINT_TOL: f64 = 1e-3;
const CLOUD_BUDGET: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FCurve {
    pub curve: ExponentCurve,
    /// Vertices `(I, D)` of the upper concave envelope, sorted by rate.
    pub hull: Vec<(f64, f64)>,
    pub capacity: f64,
    pub d_max: f64,
    pub red_alert: f64,
}

/// `F` on `grid_size` rates spanning `[0, C]`, with endpoint checks.
pub fn f_curve(w: &Dmc, grid_size: usize) -> Result<ExponentCurve> {
    Ok(f_curve_with(w, grid_size, None)?.curve)
}

/// As [`f_curve`], with an explicit simplex resolution for the point cloud.
pub fn f_curve_with(w: &Dmc, grid_size: usize, resolution: Option<usize>) -> Result<FCurve> {
    if grid_size < MIN_F_GRID {
        return Err(ExponentError::GridTooSmall {
            min: MIN_F_GRID,
            got: grid_size,
        });
    }
    let cap = capacity(w, REFERENCE_TOL)?;
    let c = cap.capacity;
    let dm = d_max(w).value;
    let er = red_alert_from(w, &cap).value;
    let resolution = resolution.unwrap_or_else(|| default_resolution(w.inputs()));

    let mut cloud = Vec::new();
    let mut q = vec![0.0; w.outputs()];
    let mut push = |p: &[f64], cloud: &mut Vec<(f64, f64)>| {
        marginal_raw(p, w.rows(), &mut q);
        let d = w
            .rows()
            .iter()
            .map(|r| kl_raw(&q, r.weights()))
            .fold(f64::NEG_INFINITY, f64::max);
        cloud.push((mutual_information_raw(p, w.rows()), d));
    };
    for_each_composition(resolution, w.inputs(), &mut |counts| {
        let p: Vec<f64> = counts
            .iter()
            .map(|&k| k as f64 / resolution as f64)
            .collect();
        push(&p, &mut cloud);
    });
    push(cap.input_dist.weights(), &mut cloud);

    let hull = upper_hull(cloud);
    let rates = if c > 0.0 {
        rate_grid(c, grid_size, false)
    } else {
        vec![0.0]
    };
    let values = rates.iter().map(|&r| evaluate(&hull, r)).collect::<Vec<_>>();

    let f0 = values[0];
    if (f0 - dm).abs() > ENDPOINT_TOL {
        return Err(ExponentError::EndpointCheck {
            what: "F(0)",
            got: f0,
            expected: dm,
        });
    }
    let fc = *values.last().expect("nonempty");
    if (fc - er).abs() > ENDPOINT_TOL {
        return Err(ExponentError::EndpointCheck {
            what: "F(C)",
            got: fc,
            expected: er,
        });
    }
    Ok(FCurve {
        curve: ExponentCurve::new(CurveKind::FOfR, rates, values),
        hull,
        capacity: c,
        d_max: dm,
        red_alert: er,
    })
}

fn default_resolution(inputs: usize) -> usize {
    let mut m = 1;
    loop {
        let mut count = 1usize;
        for i in 1..inputs {
            count = count.saturating_mul(m + 1 + i) / i;
        }
        if count > CLOUD_BUDGET || m >= 4096 {
            return m;
        }
        m += 1;
    }
}

/// Upper concave hull by monotone chain; ties in rate keep the larger value.
fn upper_hull(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    points.dedup_by(|a, b| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    // the envelope constraint is I >= R, so only the part right of the peak matters
    let peak = hull
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.1 > hull[best].1 { i } else { best });
    hull.split_off(peak)
}

/// `max { h(R') : R' >= R }` for the piecewise-linear nonincreasing envelope `h`.
fn evaluate(hull: &[(f64, f64)], r: f64) -> f64 {
    if r <= hull[0].0 {
        return hull[0].1;
    }
    for seg in hull.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if r <= b.0 {
            let t = (r - a.0) / (b.0 - a.0);
            return (a.1 + t * (b.1 - a.1)).max(0.0);
        }
    }
    hull.last().expect("nonempty").1.max(0.0)
}
