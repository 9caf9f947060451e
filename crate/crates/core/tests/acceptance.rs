//! Acceptance suite: one PASS/FAIL line per criterion, printed with `--nocapture`
//! or in the captured output of a failing run.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use common::oracles;
use common::tables::check_all_tables;
use common::{all_channels, bsc, channel_path};
use uep::exact::{exact_missed_detection, exact_region_prob, fit_log_exponent, in_sup_ball};
use uep::exponents::{
    capacity, d_max, f_curve_with, false_alarm_lower, false_alarm_upper, red_alert_exponent,
    sphere_packing_exponent, REFERENCE_TOL,
};
use uep::feedback::{
    FalseAlarmProtocol, ManyMessageProtocol, Protocol, ProtocolKind, ProtocolParams, Role, Sent,
    Transcript,
};
use uep::rng::{self, Domain};
use uep::simulation::{
    missed_detection_series, run_experiment, ProtocolExperiment, SeriesMode,
    SpecialMessageExperiment, TruthDistribution,
};
use uep::{Distribution, Dmc};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || format!("{name} = {got:.10} vs {want} (tol {tol:e})"))
}

struct Ledger {
    failed: Vec<u32>,
}

impl Ledger {
    fn run(&mut self, id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; over budget"))
            }
        });
        let (status, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(e) => ("FAIL", e.as_str()),
        };
        println!(
            "criterion {id} {status} {name}: {detail} [{:.2}s of {}s]",
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if result.is_err() {
            self.failed.push(id);
        }
        result.is_ok()
    }
}

fn closed_forms() -> Outcome {
    let w = bsc(0.1);
    let c = capacity(&w, REFERENCE_TOL).map_err(|e| e.to_string())?.capacity;
    close("capacity", c, 0.368064, 1e-6)?;
    close("capacity (full precision)", c, 0.3680642071684971, 1e-8)?;
    close("red-alert", red_alert_exponent(&w).unwrap().value, 0.5108256237659907, 1e-10)?;
    close("D_max", d_max(&w).value, 1.7577796618689758, 1e-10)?;
    close("E_fa_u", false_alarm_upper(&w).unwrap().value, 0.8788898309344879, 1e-10)?;
    let uniform = Distribution::uniform(2).unwrap();
    let esp = sphere_packing_exponent(&w, 0.192745, Some(&uniform)).unwrap();
    close("E_sp(0.192745; uniform)", esp, 0.044403, 1e-4)?;
    Ok(format!("C = {c:.10}, E_sp = {esp:.6}"))
}

/// Channels with positive entries drawn from a seeded stream, kept when `C >= 0.01`.
fn random_channels(count: usize, seed: u64) -> Vec<Dmc> {
    let mut out = Vec::new();
    let mut i = 0u64;
    while out.len() < count {
        let mut r = rng::stream(seed, Domain::Codebook, i);
        i += 1;
        let inputs = 2 + rng::below(&mut r, 2);
        let outputs = 2 + rng::below(&mut r, 3);
        let rows: Vec<Vec<f64>> = (0..inputs)
            .map(|_| {
                let v: Vec<f64> = (0..outputs).map(|_| 0.02 + r.random::<f64>()).collect();
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let w = Dmc::new(rows).unwrap();
        if capacity(&w, REFERENCE_TOL).unwrap().capacity >= 0.01 {
            out.push(w);
        }
    }
    out
}

fn is_permutation(a: &[f64], b: &[f64]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Rows are permutations of each other and so are columns; `P_Y*` is then uniform.
fn uniform_output_symmetric(w: &Dmc) -> bool {
    let rows = w.to_rows();
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    rows.iter().all(|r| is_permutation(r, &rows[0]))
        && (0..w.outputs()).all(|j| is_permutation(&col(j), &col(0)))
}

fn structural_identities() -> Outcome {
    let mut checked = 0;
    let mut uniform_symmetric = Vec::new();
    let mut partition_only = Vec::new();
    for (name, w) in all_channels() {
        let c = capacity(&w, REFERENCE_TOL).unwrap().capacity;
        if c < 1e-9 {
            continue;
        }
        let f = f_curve_with(&w, 48, None).map_err(|e| format!("{name}: {e}"))?;
        let (r, v) = (&f.curve.rates, &f.curve.values);
        close(&format!("{name} F(0)"), v[0], d_max(&w).value, 1e-3)?;
        close(&format!("{name} F(C)"), *v.last().unwrap(), red_alert_exponent(&w).unwrap().value, 1e-3)?;
        ensure(v.windows(2).all(|p| p[1] <= p[0] + 1e-12), || format!("{name}: F increases"))?;
        let slopes: Vec<f64> = (1..r.len())
            .filter(|&i| r[i] > r[i - 1])
            .map(|i| (v[i] - v[i - 1]) / (r[i] - r[i - 1]))
            .collect();
        ensure(slopes.windows(2).all(|s| s[1] <= s[0] + 1e-6), || format!("{name}: F not concave"))?;
        let lower = false_alarm_lower(&w).unwrap().value;
        let upper = false_alarm_upper(&w).unwrap().value;
        ensure(lower <= upper + 1e-9, || format!("{name}: E_fa_l {lower} > E_fa_u {upper}"))?;
        let e0 = sphere_packing_exponent(&w, 0.0, None).unwrap();
        let er = red_alert_exponent(&w).unwrap().value;
        if uniform_output_symmetric(&w) {
            close(&format!("{name} E_sp(0)"), e0, er, 1e-4)?;
            uniform_symmetric.push(name.clone());
        } else if w.is_symmetric().unwrap_or(false) {
            partition_only.push(format!("{name} E_sp(0) {e0:.4} vs E_r {er:.4}"));
        }
        checked += 1;
    }
    let mut margin = f64::INFINITY;
    for (i, w) in random_channels(20, 2024).iter().enumerate() {
        let c = capacity(w, REFERENCE_TOL).unwrap().capacity;
        let lower = false_alarm_lower(w).unwrap().value;
        let upper = false_alarm_upper(w).unwrap().value;
        ensure(lower >= c + 1e-6, || format!("random channel {i}: E_fa_l {lower} vs C {c}"))?;
        ensure(lower <= upper + 1e-9, || format!("random channel {i}: E_fa_l > E_fa_u"))?;
        margin = margin.min(lower - c);
    }
    ensure(!uniform_symmetric.is_empty(), || "no symmetric channel with uniform P_Y*".into())?;
    Ok(format!(
        "{checked} bundled channels, 20 random channels, min E_fa_l - C = {margin:.3e}; \
         E_sp(0) = E_r on {}; partition-symmetric with nonuniform P_Y* (identity not implied): {}",
        uniform_symmetric.join(" "),
        partition_only.join(", ")
    ))
}

fn oracle_equivalence() -> Outcome {
    oracles::check_all()?;
    Ok("capacity, E_sp, F, E_fa_l, d_max, is_symmetric on every bundled 2x2 and 2x3 channel".into())
}

fn exact_exponents() -> Outcome {
    let w = bsc(0.1);
    let ns = [500u64, 1000, 2000, 4000];
    let slope = |delta: f64| -> Result<f64, String> {
        let ln: Vec<f64> = ns
            .iter()
            .map(|&n| exact_missed_detection(&w, n, delta).map(|p| p.ln_probability))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        Ok(fit_log_exponent(&ns, &ln).map_err(|e| e.to_string())?.slope)
    };
    let fitted = slope(0.01)?;
    close("fitted slope", fitted, 0.489053, 0.02)?;
    let ladder = [slope(0.1)?, slope(0.05)?, fitted];
    ensure(ladder.windows(2).all(|p| p[0] < p[1]), || format!("ladder not increasing: {ladder:?}"))?;
    ensure(ladder[2] < 0.5108256237659907, || format!("ladder exceeds red-alert: {ladder:?}"))?;
    Ok(format!("slope {fitted:.6}; delta ladder {:.4} < {:.4} < {:.4} < 0.5108", ladder[0], ladder[1], ladder[2]))
}

fn decision_tables() -> Outcome {
    let n = check_all_tables()?;
    Ok(format!("{n} decisions match the straight-line rules"))
}

fn transcripts(p: Protocol, w: &Dmc, truth: TruthDistribution, trials: u64, seed: u64) -> Result<Vec<Transcript>, String> {
    let exp = ProtocolExperiment::new(p, w, truth).map_err(|e| e.to_string())?;
    (0..trials)
        .into_par_iter()
        .map(|i| exp.transcript(seed, i).map_err(|e| e.to_string()))
        .collect()
}

fn spec_params(k: usize) -> ProtocolParams {
    ProtocolParams {
        k,
        seed: 6,
        ..ProtocolParams::default()
    }
}

/// Bit errors must coincide with a wrong tentative bit followed by a typical `x_r` phase.
fn audit_special_bit(w: &Dmc, params: &ProtocolParams, trials: u64, seed: u64) -> Result<usize, String> {
    let p = Protocol::build(ProtocolKind::SpecialBit, w, params).map_err(|e| e.to_string())?;
    let x_r = p.constants().x_r;
    let mut errors = 0;
    for t in transcripts(p, w, TruthDistribution::Uniform, trials, seed)? {
        if t.decoded[0] != t.truth[0] {
            errors += 1;
            let last = t.last_attempt();
            ensure(
                last.phases[0].decision != Some(t.truth[0])
                    && last.phases[1].sent == Sent::Repeat(x_r)
                    && last.phases[1].typical == Some(true),
                || format!("bit error without its two events: {t:?}"),
            )?;
        }
    }
    Ok(errors)
}

struct FalseAlarmAudit {
    alarms: usize,
    trials: usize,
    attempts: usize,
    indicator_errors: usize,
    confirmed: usize,
    ball: f64,
}

impl FalseAlarmAudit {
    fn indicator_error_rate(&self) -> f64 {
        self.indicator_errors as f64 / self.attempts as f64
    }

    fn alarm_rate(&self) -> f64 {
        self.alarms as f64 / self.trials as f64
    }

    fn confirm_rate(&self) -> f64 {
        self.confirmed as f64 / self.indicator_errors as f64
    }
}

/// Every false alarm must show an indicator error and an `x_a`-typical `x_d` output.
fn audit_false_alarm(w: &Dmc, params: &ProtocolParams, trials: u64, seed: u64) -> Result<FalseAlarmAudit, String> {
    let p = FalseAlarmProtocol::new(w, params).map_err(|e| e.to_string())?;
    let c = p.constants().clone();
    let ball = exact_region_prob(w.row(c.x_d), p.k() as u64, |k| {
        in_sup_ball(k, w.row(c.x_a).weights(), p.confirm_radius())
    })
    .map_err(|e| e.to_string())?
    .probability;
    let ts = transcripts(Protocol::FalseAlarm(p), w, TruthDistribution::Ordinary, trials, seed)?;
    let mut audit = FalseAlarmAudit {
        alarms: 0,
        trials: ts.len(),
        attempts: 0,
        indicator_errors: 0,
        confirmed: 0,
        ball,
    };
    for t in &ts {
        for a in &t.attempts {
            audit.attempts += 1;
            if a.phases[0].decision == Some(1) {
                audit.indicator_errors += 1;
                audit.confirmed += (a.phases[1].typical == Some(true)) as usize;
            }
        }
        if t.decoded[0] == 0 {
            audit.alarms += 1;
            let last = t.last_attempt();
            ensure(
                last.phases[0].decision == Some(1)
                    && last.phases[1].role == Role::Confirm
                    && last.phases[1].sent == Sent::Repeat(c.x_d)
                    && last.phases[1].typical == Some(true),
                || format!("false alarm without its two events: {t:?}"),
            )?;
        }
    }
    Ok(audit)
}

struct ControlAudit {
    rejects_sent: usize,
    accepted: usize,
    trials: usize,
    ball: f64,
}

/// Control phases that sent `x_d`, and how many of their outputs landed in the `x_a` ball.
fn audit_control(w: &Dmc, params: &ProtocolParams, trials: u64, seed: u64) -> Result<ControlAudit, String> {
    let p = ManyMessageProtocol::new(w, params).map_err(|e| e.to_string())?;
    let c = p.constants().clone();
    let ball = exact_region_prob(w.row(c.x_d), p.control_len() as u64, |k| {
        in_sup_ball(k, w.row(c.x_a).weights(), p.control_radius())
    })
    .map_err(|e| e.to_string())?
    .probability;
    let ts = transcripts(Protocol::ManyMessage(p), w, TruthDistribution::Balanced, trials, seed)?;
    let mut audit = ControlAudit {
        rejects_sent: 0,
        accepted: 0,
        trials: ts.len(),
        ball,
    };
    for a in ts.iter().flat_map(|t| &t.attempts) {
        if let Some(ph) = a.phases.iter().find(|ph| ph.role == Role::Control) {
            if ph.sent == Sent::Repeat(c.x_d) {
                audit.rejects_sent += 1;
                audit.accepted += (ph.typical == Some(true)) as usize;
            }
        }
    }
    Ok(audit)
}

fn within_factor(name: &str, got: f64, want: f64, factor: f64) -> Result<(), String> {
    ensure(got >= want / factor && got <= want * factor, || {
        format!("{name}: measured {got:.4e} outside [{:.4e}, {:.4e}]", want / factor, want * factor)
    })
}

fn protocol_audits() -> Outcome {
    let w = bsc(0.05);
    let c05 = capacity(&w, REFERENCE_TOL).unwrap().capacity;
    let trials = 10_000;
    let mut notes = Vec::new();

    // (a) special-bit audit at the stated configuration, then where errors occur
    let errors = audit_special_bit(&w, &spec_params(256), trials, 61)?;
    let noisy = audit_special_bit(&bsc(0.25), &spec_params(64), trials, 62)?;
    ensure(noisy > 0, || "noisy special-bit run produced no bit errors".into())?;
    notes.push(format!("(a) bit errors {errors} at k=256, {noisy} audited at BSC(0.25) k=64"));

    // (b) false-alarm audit and (d) its rate against the exact ball probability
    let fa = audit_false_alarm(&w, &spec_params(256), trials, 63)?;
    let fa512 = audit_false_alarm(&w, &spec_params(512), trials, 64)?;
    ensure(fa512.alarm_rate() <= 10.0 * fa512.ball * fa512.indicator_error_rate(), || {
        format!("k=512 false-alarm rate {} above bound", fa512.alarm_rate())
    })?;
    let small = ProtocolParams {
        phase1_len: Some(3),
        typicality_radius: Some(0.3),
        ..spec_params(8)
    };
    let fa_noisy = audit_false_alarm(&bsc(0.3), &small, trials, 65)?;
    ensure(fa_noisy.alarms > 0, || "noisy false-alarm run produced no alarms".into())?;
    ensure(fa_noisy.alarm_rate() <= 10.0 * fa_noisy.ball * fa_noisy.indicator_error_rate(), || {
        format!("false-alarm rate {} above bound", fa_noisy.alarm_rate())
    })?;
    within_factor("x_d output in x_a ball", fa_noisy.confirm_rate(), fa_noisy.ball, 3.0)?;
    notes.push(format!(
        "(b) alarms {} at k=256, {} at k=512, {} audited at BSC(0.3) k=8 (ball {:.4} vs measured {:.4})",
        fa.alarms,
        fa512.alarms,
        fa_noisy.alarms,
        fa_noisy.ball,
        fa_noisy.confirm_rate()
    ));

    // (c) Gamma under uniform truth
    let mm = ProtocolParams {
        rates: vec![c05 / 2.0],
        ..spec_params(256)
    };
    let p = Protocol::build(ProtocolKind::ManyMessage, &w, &mm).map_err(|e| e.to_string())?;
    let exp = ProtocolExperiment::new(p, &w, TruthDistribution::Uniform).map_err(|e| e.to_string())?;
    let report = run_experiment(&exp, trials, 66).map_err(|e| e.to_string())?;
    ensure((1.0..=1.1).contains(&report.gamma_hat), || format!("Gamma = {}", report.gamma_hat))?;
    notes.push(format!("(c) Gamma {:.4}", report.gamma_hat));

    // (d) control-phase acceptances against the exact x_a-ball probability under x_d
    let ctrl = audit_control(&w, &mm, trials, 67)?;
    ensure(ctrl.accepted as f64 / ctrl.trials as f64 <= 10.0 * ctrl.ball, || {
        format!("control acceptances {} of {} above bound", ctrl.accepted, ctrl.trials)
    })?;
    let noisy_mm = ProtocolParams {
        rates: vec![0.02],
        special_count: 16,
        typicality_radius: Some(0.3),
        ..spec_params(24)
    };
    let ctrl_noisy = audit_control(&bsc(0.3), &noisy_mm, trials, 68)?;
    ensure(ctrl_noisy.rejects_sent >= 100, || format!("only {} x_d control phases", ctrl_noisy.rejects_sent))?;
    let measured = ctrl_noisy.accepted as f64 / ctrl_noisy.rejects_sent as f64;
    within_factor("control acceptance", measured, ctrl_noisy.ball, 3.0)?;
    notes.push(format!(
        "(d) control acceptances {} of {} x_d phases at k=256; BSC(0.3) ball {:.4} vs measured {:.4}",
        ctrl.accepted, ctrl.rejects_sent, ctrl_noisy.ball, measured
    ));

    // (d) block missed detection against the exact probability, where p >= 1e-5
    let b = bsc(0.1);
    let p200 = exact_missed_detection(&b, 200, 0.05).unwrap().probability;
    let p60 = exact_missed_detection(&b, 60, 0.2).unwrap().probability;
    let exp = SpecialMessageExperiment::new(&b, 60, 4, Some(0.2), 7, TruthDistribution::Special)
        .map_err(|e| e.to_string())?;
    let md = run_experiment(&exp, 1_000_000, 69).map_err(|e| e.to_string())?;
    let rate = md.rate("missed_detection").unwrap_or(0.0);
    within_factor("block missed detection n=60", rate, p60, 3.0)?;
    let ladder = [10u64, 20, 30, 40];
    let exact = missed_detection_series(&b, 0.2, &ladder, SeriesMode::Exact).map_err(|e| e.to_string())?;
    let mc = missed_detection_series(&b, 0.2, &ladder, SeriesMode::MonteCarlo { trials: 1_000_000, seed: 70 })
        .map_err(|e| e.to_string())?;
    let se = mc.sampling_stderr.hypot(exact.sampling_stderr);
    ensure((mc.fit.slope - exact.fit.slope).abs() <= 3.0 * se, || {
        format!("MC slope {} vs exact {} (se {se})", mc.fit.slope, exact.fit.slope)
    })?;
    notes.push(format!(
        "block n=200 p={p200:.2e} below MC reach; n=60 p={p60:.3e} measured {rate:.3e}; slope {:.4} vs {:.4}",
        mc.fit.slope, exact.fit.slope
    ));
    Ok(notes.join("; "))
}

fn uep(args: &[&str]) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_uep"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
    Ok(o.stdout)
}

fn determinism() -> Outcome {
    let ch = channel_path("bsc005.json").to_string_lossy().into_owned();
    let commands: Vec<Vec<&str>> = vec![
        vec!["exponents", "--channel", &ch],
        vec!["exact", "--channel", &ch, "--n", "400", "--delta", "0.05", "--ladder", "100,200,400"],
        vec!["simulate", "--channel", &ch, "--protocol", "special_bit", "--k", "64", "--trials", "2000", "--seed", "3"],
        vec!["simulate", "--channel", &ch, "--protocol", "many_message", "--k", "64", "--rates", "0.1",
             "--trials", "2000", "--seed", "3", "--truth", "balanced"],
    ];
    for args in &commands {
        let first = uep(args)?;
        ensure(first == uep(args)?, || format!("{args:?} differs between runs"))?;
        for workers in ["1", "4"] {
            let mut with = vec!["--workers", workers];
            with.extend(args);
            ensure(first == uep(&with)?, || format!("{args:?} differs with {workers} workers"))?;
        }
    }
    Ok(format!("{} commands byte-identical across reruns and worker counts", commands.len()))
}

fn non_reproducibility(finite_ok: bool) -> Outcome {
    let w = bsc(0.1);
    let er = red_alert_exponent(&w).unwrap().value;
    let ns = [500u64, 1000, 2000, 4000];
    let ln: Vec<f64> = ns
        .iter()
        .map(|&n| exact_missed_detection(&w, n, 0.01).unwrap().ln_probability)
        .collect();
    let slope = fit_log_exponent(&ns, &ln).unwrap().slope;
    let note = format!(
        "asymptotic optimality (attainment of E_r, (1-r/C)E_r, min(E_r, (1-r/C)D_max), D_max at capacity) \
         is a limit over capacity-achieving sequences and is not reproduced; at n <= 4000 the measured \
         missed-detection exponent is {slope:.4} against the limit {er:.4}; finite-parameter predictions \
         are verified instead by criteria 4 and 6"
    );
    if finite_ok {
        Ok(note)
    } else {
        Err(format!("{note}, and at least one of them failed"))
    }
}

#[test]
fn acceptance() {
    let mut ledger = Ledger { failed: Vec::new() };
    let s = Duration::from_secs;
    ledger.run(1, "closed-form exponents", s(1), closed_forms);
    ledger.run(2, "structural identities", s(30), structural_identities);
    ledger.run(3, "oracle equivalence", s(300), oracle_equivalence);
    let c4 = ledger.run(4, "exact exponent measurement", s(60), exact_exponents);
    ledger.run(5, "decision tables", s(10), decision_tables);
    let c6 = ledger.run(6, "protocol audits", s(300), protocol_audits);
    ledger.run(7, "determinism", s(60), determinism);
    ledger.run(8, "non-reproducibility note", s(60), || non_reproducibility(c4 && c6));
    assert!(ledger.failed.is_empty(), "failed criteria: {:?}", ledger.failed);
}
