//! Brute-force oracles for every exponent optimizer. Each `check_*` returns a
//! description of the first mismatch.

use proptest::prelude::*;
use uep::exponents::{
    capacity, d_max, f_curve_with, false_alarm_lower, false_alarm_upper, red_alert_exponent,
    sphere_packing_exponent, REFERENCE_TOL,
};
use uep::probability::{kl_divergence, mutual_information, output_marginal};
use uep::{Distribution, Dmc};

use super::{all_channels, binary_input_channels};

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

fn binary_info(t: f64, w: &Dmc) -> f64 {
    let p = Distribution::new(vec![1.0 - t, t]).unwrap();
    mutual_information(&p, w).unwrap()
}

pub fn check_capacity() -> Check {
    for (name, w) in binary_input_channels() {
        let c = capacity(&w, 1e-12).unwrap().capacity;
        let best = (0..=10_000)
            .map(|i| binary_info(i as f64 * 1e-4, &w))
            .fold(f64::NEG_INFINITY, f64::max);
        ensure(c >= best - 1e-12 && c - best < 1e-6, || format!("capacity {name}: {c} vs {best}"))?;
    }
    Ok(())
}

pub fn check_d_max() -> Check {
    for (name, w) in binary_input_channels() {
        let d = d_max(&w);
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for a in 0..w.inputs() {
            for b in 0..w.inputs() {
                let v = kl_divergence(w.row(a), w.row(b)).unwrap();
                if v > best.0 {
                    best = (v, a, b);
                }
            }
        }
        ensure((d.value, d.x_a, d.x_d) == best, || format!("d_max {name}: {d:?} vs {best:?}"))?;
    }
    Ok(())
}

/// `min D(V || W | P)` over binary-output channels `V` with `I(P, V) <= r`, by a
/// grid over `(V_0(0), V_1(0))` refined twice around the incumbent.
fn sphere_packing_grid(w: &Dmc, p: &[f64], r: f64, steps: usize) -> f64 {
    let eval = |a: f64, b: f64| {
        let v0 = [a, 1.0 - a];
        let v1 = [b, 1.0 - b];
        let q = [p[0] * a + p[1] * b, p[0] * (1.0 - a) + p[1] * (1.0 - b)];
        let info = p[0] * kl(&v0, &q) + p[1] * kl(&v1, &q);
        // slack absorbs rounding on the diagonal a == b at r = 0
        if info > r + 1e-15 {
            return f64::INFINITY;
        }
        p[0] * kl(&v0, w.row(0).weights()) + p[1] * kl(&v1, w.row(1).weights())
    };
    let (mut best, mut at) = (f64::INFINITY, (0.5, 0.5));
    let (mut lo, mut width) = ((0.0, 0.0), 1.0);
    for _ in 0..3 {
        let h = width / steps as f64;
        for i in 0..=steps {
            let a = lo.0 + i as f64 * h;
            if !(a > 0.0 && a < 1.0) {
                continue;
            }
            for j in 0..=steps {
                let b = lo.1 + j as f64 * h;
                if !(b > 0.0 && b < 1.0) {
                    continue;
                }
                let d = eval(a, b);
                if d < best {
                    best = d;
                    at = (a, b);
                }
            }
        }
        width = 4.0 * h;
        lo = (at.0 - 2.0 * h, at.1 - 2.0 * h);
    }
    best
}

pub fn check_sphere_packing_fixed_input() -> Check {
    for (name, w) in binary_input_channels() {
        if w.outputs() != 2 {
            continue;
        }
        for t in [0.3, 0.5, 0.65] {
            let p = Distribution::new(vec![1.0 - t, t]).unwrap();
            let full = mutual_information(&p, &w).unwrap();
            for frac in [0.0, 0.25, 0.6] {
                let r = frac * full;
                let got = sphere_packing_exponent(&w, r, Some(&p)).unwrap();
                let oracle = sphere_packing_grid(&w, p.weights(), r, 400);
                ensure(got <= oracle + 1e-9 && oracle - got < 1e-4, || {
                    format!("E_sp(r;P) {name} t={t} r={r}: {got} vs {oracle}")
                })?;
            }
        }
    }
    Ok(())
}

/// `max_Q E_0(rho, Q)` over binary input laws.
fn e0_max(w: &Dmc, rho: f64) -> f64 {
    let e0 = |t: f64| {
        let s = 1.0 / (1.0 + rho);
        let total: f64 = (0..w.outputs())
            .map(|y| {
                let inner = (1.0 - t) * w.row(0).get(y).powf(s) + t * w.row(1).get(y).powf(s);
                inner.powf(1.0 + rho)
            })
            .sum();
        -total.ln()
    };
    let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..=400 {
        let t = i as f64 / 400.0;
        let v = e0(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let (mut lo, mut hi) = ((best_t - 1.0 / 400.0).max(0.0), (best_t + 1.0 / 400.0).min(1.0));
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if e0(m1) < e0(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best.max(e0(0.5 * (lo + hi)))
}

/// Dual form `sup_rho [max_Q E_0(rho, Q) - rho r]`.
fn sphere_packing_dual(w: &Dmc, r: f64) -> f64 {
    let mut best = 0.0f64;
    let mut rho = 0.0;
    while rho <= 60.0 {
        best = best.max(e0_max(w, rho) - rho * r);
        rho += 0.01;
    }
    best
}

pub fn check_sphere_packing_dual() -> Check {
    for (name, w) in binary_input_channels() {
        let c = capacity(&w, REFERENCE_TOL).unwrap().capacity;
        if c < 1e-9 {
            continue;
        }
        for frac in [0.1, 0.3, 0.5, 0.8] {
            let r = frac * c;
            let got = sphere_packing_exponent(&w, r, None).unwrap();
            let oracle = sphere_packing_dual(&w, r);
            ensure((got - oracle).abs() < 1e-4, || format!("E_sp {name} r={r}: {got} vs {oracle}"))?;
        }
    }
    Ok(())
}

/// `min D(V || W | P)` subject to `P V = target`, over a grid of free rows.
fn false_alarm_grid(w: &Dmc, p: &[f64], target: &[f64], steps: usize) -> f64 {
    let ny = w.outputs();
    let mut best = f64::INFINITY;
    let mut visit = |v0: &[f64]| {
        let v1: Vec<f64> = (0..ny)
            .map(|y| (target[y] - p[0] * v0[y]) / p[1])
            .collect();
        if v1.iter().any(|v| *v < 0.0) {
            return;
        }
        let d = p[0] * kl(v0, w.row(0).weights()) + p[1] * kl(&v1, w.row(1).weights());
        best = best.min(d);
    };
    match ny {
        2 => {
            for i in 0..=steps {
                let a = i as f64 / steps as f64;
                visit(&[a, 1.0 - a]);
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = i as f64 / steps as f64;
                    let b = j as f64 / steps as f64;
                    visit(&[a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
        _ => unreachable!(),
    }
    best
}

pub fn check_false_alarm_lower() -> Check {
    for (name, w) in binary_input_channels() {
        let cap = capacity(&w, REFERENCE_TOL).unwrap();
        let p = cap.input_dist.weights();
        let steps = if w.outputs() == 2 { 200_000 } else { 1500 };
        let oracle = (0..w.inputs())
            .map(|i| false_alarm_grid(&w, p, w.row(i).weights(), steps))
            .fold(f64::NEG_INFINITY, f64::max);
        let got = false_alarm_lower(&w).unwrap().value;
        let tol = if w.outputs() == 2 { 1e-6 } else { 1e-4 };
        ensure(got <= oracle + 1e-9 && oracle - got < tol, || format!("E_fa_l {name}: {got} vs {oracle}"))?;
        let upper = false_alarm_upper(&w).unwrap().value;
        ensure(got <= upper + 1e-9, || format!("E_fa_l {name}: {got} above E_fa_u {upper}"))?;
    }
    Ok(())
}

/// Grid of `(I(P, W), max_x D(P W || W_x))` over binary input laws with step 0.01.
fn f_grid(w: &Dmc) -> Vec<(f64, f64)> {
    (0..=100)
        .map(|i| {
            let t = i as f64 / 100.0;
            let p = Distribution::new(vec![1.0 - t, t]).unwrap();
            let q = output_marginal(&p, w).unwrap();
            let d = (0..w.inputs())
                .map(|x| kl_divergence(&q, w.row(x)).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            (mutual_information(&p, w).unwrap(), d)
        })
        .collect()
}

/// Brute force over `(alpha, x1, x2, P1, P2)` on 0.01 grids.
fn f_brute_force(pts: &[(f64, f64)], r: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in pts {
        for b in pts {
            for k in 0..=100 {
                let alpha = k as f64 / 100.0;
                if alpha * a.0 + (1.0 - alpha) * b.0 >= r {
                    best = best.max(alpha * a.1 + (1.0 - alpha) * b.1);
                }
            }
        }
    }
    best
}

/// Compares `F` against the brute force on `channels`, with `grid` curve points each.
pub fn check_f_curve(channels: &[(String, Dmc)], grid: usize) -> Check {
    for (name, w) in channels {
        let f = f_curve_with(w, grid, None).unwrap();
        let pts = f_grid(w);
        // rates above the grid's best information are clamped to it
        let top = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        for (r, v) in f.curve.points() {
            let oracle = f_brute_force(&pts, r.min(top));
            ensure((v - oracle).abs() < 1e-2, || format!("F {name} r={r}: {v} vs {oracle}"))?;
        }
    }
    Ok(())
}

pub fn check_f_endpoints() -> Check {
    for (name, w) in binary_input_channels() {
        let f = f_curve_with(&w, 32, None).unwrap();
        let (first, last) = (f.curve.values[0], *f.curve.values.last().unwrap());
        let dm = d_max(&w).value;
        let er = red_alert_exponent(&w).unwrap().value;
        ensure((first - dm).abs() < 1e-3 && (last - er).abs() < 1e-3, || {
            format!("F endpoints {name}: ({first}, {last}) vs ({dm}, {er})")
        })?;
    }
    Ok(())
}

/// Every set partition of `0..n` as a block label per element.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let top = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for label in 0..=top {
            prefix.push(label);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

fn is_permutation(a: &[f64], b: &[f64]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-9)
}

pub fn symmetric_by_brute_force(m: &[Vec<f64>]) -> bool {
    let ny = m[0].len();
    set_partitions(ny).into_iter().any(|labels| {
        let blocks = labels.iter().copied().max().unwrap() + 1;
        (0..blocks).all(|b| {
            let cols: Vec<usize> = (0..ny).filter(|&y| labels[y] == b).collect();
            let sub: Vec<Vec<f64>> = m
                .iter()
                .map(|row| cols.iter().map(|&y| row[y]).collect())
                .collect();
            let rows_ok = sub.iter().all(|r| is_permutation(r, &sub[0]));
            let col = |j: usize| sub.iter().map(|r| r[j]).collect::<Vec<f64>>();
            let cols_ok = (0..cols.len()).all(|j| is_permutation(&col(j), &col(0)));
            rows_ok && cols_ok
        })
    })
}

pub fn check_symmetry() -> Check {
    for (name, w) in all_channels() {
        let got = w.is_symmetric().unwrap();
        let want = symmetric_by_brute_force(&w.to_rows());
        ensure(got == want, || format!("is_symmetric {name}: {got} vs {want}"))?;
    }
    Ok(())
}

/// Every optimizer against its oracle on the bundled channels.
pub fn check_all() -> Check {
    check_capacity()?;
    check_d_max()?;
    check_sphere_packing_fixed_input()?;
    check_sphere_packing_dual()?;
    check_false_alarm_lower()?;
    check_f_curve(&binary_input_channels(), 16)?;
    check_f_endpoints()?;
    check_symmetry()
}

/// Symmetric channels assembled from constant and circulant blocks, with shuffled columns.
pub fn symmetric_channel(inputs: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    let block = prop::collection::vec(0.05f64..1.0, inputs);
    (
        prop::collection::vec(prop_oneof![Just(1usize), Just(inputs)], 1..=3),
        prop::collection::vec(block, 3),
        prop::collection::vec(0.05f64..1.0, 3),
        Just(()).prop_perturb(|_, mut rng| rng.random::<u64>()),
    )
        .prop_map(move |(sizes, blocks, consts, shuffle)| {
            let mut rows = vec![Vec::new(); inputs];
            for (k, size) in sizes.iter().enumerate() {
                for (x, row) in rows.iter_mut().enumerate() {
                    if *size == 1 {
                        row.push(consts[k]);
                    } else {
                        for j in 0..*size {
                            row.push(blocks[k][(j + x) % size]);
                        }
                    }
                }
            }
            let ny = rows[0].len();
            let mut order: Vec<usize> = (0..ny).collect();
            let mut s = shuffle;
            for i in (1..ny).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let total: f64 = rows[0].iter().sum();
            rows.iter()
                .map(|r| order.iter().map(|&y| r[y] / total).collect())
                .collect()
        })
}

pub fn random_channel(inputs: usize, outputs: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    outputs.prop_flat_map(move |ny| {
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, ny), inputs).prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect()
        })
    })
}
