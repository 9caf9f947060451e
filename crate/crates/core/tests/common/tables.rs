//! Straight-line reimplementations of the block decoders, checked on every
//! binary output sequence of length at most 6.

use uep::blockcodes::{
    self, default_radius, Codebook, DecodeOutcome, Scheme,
};
use uep::rng::{self, Domain};
use uep::Dmc;

use super::all_channels;

pub const MAX_N: usize = 6;

/// All outputs of length `n` over a binary alphabet, in counting order.
pub fn binary_outputs(n: usize) -> Vec<Vec<usize>> {
    (0..1usize << n)
        .map(|v| (0..n).map(|t| (v >> t) & 1).collect())
        .collect()
}

fn ln_likelihood(x: &[usize], y: &[usize], w: &Dmc) -> f64 {
    let mut p = 1.0;
    for t in 0..x.len() {
        p *= w.row(x[t]).get(y[t]);
    }
    p.ln()
}

fn ml(candidates: &[usize], cb: &Codebook, y: &[usize], w: &Dmc) -> Option<usize> {
    let scores: Vec<f64> = candidates
        .iter()
        .map(|&i| ln_likelihood(&cb.codewords[i], y, w))
        .collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut pick = None;
    for (k, &i) in candidates.iter().enumerate() {
        if scores[k] >= best - 1e-9 && pick.is_none_or(|p| i < p) {
            pick = Some(i);
        }
    }
    pick
}

fn counts(y: &[usize], outputs: usize) -> Vec<f64> {
    let mut c = vec![0.0; outputs];
    for &b in y {
        c[b] += 1.0;
    }
    c
}

fn inside(y: &[usize], center: &[f64], radius: f64) -> bool {
    let n = y.len() as f64;
    let c = counts(y, center.len());
    let mut ok = true;
    for b in 0..center.len() {
        if (c[b] - n * center[b]).abs() > n * radius + 1e-9 {
            ok = false;
        }
    }
    ok
}

fn ordinaries(cb: &Codebook) -> Vec<usize> {
    (0..cb.codewords.len())
        .filter(|i| !cb.special_set.contains(i))
        .collect()
}

fn cond_div(x: &[usize], y: &[usize], w: &Dmc) -> f64 {
    let n = x.len() as f64;
    let mut total = 0.0;
    for a in 0..w.inputs() {
        let n_a = x.iter().filter(|&&v| v == a).count() as f64;
        for b in 0..w.outputs() {
            let k = (0..x.len()).filter(|&t| x[t] == a && y[t] == b).count() as f64;
            if k > 0.0 {
                total += (k / n) * ((k / n_a) / w.row(a).get(b)).ln();
            }
        }
    }
    total
}

fn in_any_shell(cb: &Codebook, y: &[usize], w: &Dmc, threshold: f64) -> bool {
    cb.special_set
        .iter()
        .any(|&i| cond_div(&cb.codewords[i], y, w) <= threshold + 1e-12)
}

/// Decision of the reference rule for `cb.scheme`; `erasure` selects the erasure variant.
pub fn reference(cb: &Codebook, y: &[usize], w: &Dmc, erasure: Option<f64>) -> DecodeOutcome {
    let ord = ordinaries(cb);
    match (&cb.scheme, erasure) {
        (Scheme::SpecialMessage { center, .. }, _) => {
            if !inside(y, center, cb.typicality_radius) {
                DecodeOutcome::Message(cb.special_set[0])
            } else {
                DecodeOutcome::Message(ml(&ord, cb, y, w).unwrap())
            }
        }
        (Scheme::FalseAlarm { center, .. }, _) => {
            if inside(y, center, cb.typicality_radius) {
                DecodeOutcome::Message(cb.special_set[0])
            } else {
                DecodeOutcome::Message(ml(&ord, cb, y, w).unwrap())
            }
        }
        (Scheme::TwoStage { threshold, .. }, None) => {
            let shell = in_any_shell(cb, y, w, *threshold);
            let pick = if shell || ord.is_empty() {
                ml(&cb.special_set, cb, y, w)
            } else {
                ml(&ord, cb, y, w)
            };
            DecodeOutcome::Message(pick.unwrap())
        }
        (Scheme::TwoStage { threshold, .. }, Some(t)) => {
            if !in_any_shell(cb, y, w, *threshold) && !ord.is_empty() {
                return DecodeOutcome::Message(ml(&ord, cb, y, w).unwrap());
            }
            let mut winners = Vec::new();
            for &i in &cb.special_set {
                let own = ln_likelihood(&cb.codewords[i], y, w);
                let mut rival = f64::NEG_INFINITY;
                for &j in &cb.special_set {
                    if j != i {
                        rival = rival.max(ln_likelihood(&cb.codewords[j], y, w));
                    }
                }
                if own - rival >= y.len() as f64 * t - 1e-9 {
                    winners.push(i);
                }
            }
            if winners.len() == 1 {
                DecodeOutcome::Message(winners[0])
            } else {
                DecodeOutcome::Erasure
            }
        }
    }
}

fn random_words(n: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng::stream(seed, Domain::Codebook, 7);
    (0..count)
        .map(|_| (0..n).map(|_| rng::below(&mut r, 2)).collect())
        .collect()
}

fn two_stage(n: usize, threshold: f64, seed: u64) -> Codebook {
    Codebook {
        n,
        codewords: random_words(n, 4, seed),
        special_set: vec![0, 1],
        composition: None,
        typicality_radius: default_radius(n),
        scheme: Scheme::TwoStage {
            threshold,
            rate: 0.0,
            epsilon: 0.0,
        },
    }
}

/// Every decoder table on every binary-output bundled channel; returns the
/// number of table entries checked, or the first mismatch.
pub fn check_all_tables() -> Result<usize, String> {
    let mut checked = 0;
    let channels: Vec<(String, Dmc)> = all_channels()
        .into_iter()
        .filter(|(_, w)| w.inputs() == 2 && w.outputs() == 2)
        .collect();
    for (name, w) in &channels {
        for n in 1..=MAX_N {
            let outputs = binary_outputs(n);
            let mut cases: Vec<(String, Codebook, Option<f64>)> = Vec::new();
            let special = blockcodes::build_special_message_code(w, n, 3, n as u64).unwrap();
            for delta in [None, Some(0.0), Some(0.1), Some(0.25)] {
                let cb = match delta {
                    Some(d) => special.clone().with_radius(d).unwrap(),
                    None => special.clone(),
                };
                cases.push((format!("special δ={delta:?}"), cb, None));
            }
            let fa = blockcodes::build_false_alarm_code(w, n, 3, n as u64).unwrap();
            for delta in [None, Some(0.0), Some(0.2), Some(0.5)] {
                let cb = match delta {
                    Some(d) => fa.clone().with_radius(d).unwrap(),
                    None => fa.clone(),
                };
                cases.push((format!("false alarm δ={delta:?}"), cb, None));
            }
            for (k, threshold) in [0.0, 0.05, 0.2, 0.6].into_iter().enumerate() {
                let cb = two_stage(n, threshold, (n * 10 + k) as u64);
                for erasure in [None, Some(0.0), Some(0.05), Some(0.1), Some(0.3)] {
                    cases.push((format!("two-stage T={threshold} erasure={erasure:?}"), cb.clone(), erasure));
                }
            }
            for (label, cb, erasure) in &cases {
                for y in &outputs {
                    let got = match erasure {
                        None => blockcodes::decode(y, cb, w),
                        Some(t) => blockcodes::decode_two_stage_with_erasure(y, cb, w, *t),
                    }
                    .map_err(|e| format!("{name} n={n} {label} y={y:?}: {e}"))?;
                    let want = reference(cb, y, w, *erasure);
                    if got != want {
                        return Err(format!(
                            "{name} n={n} {label} y={y:?}: decoder {got:?}, reference {want:?}"
                        ));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}
