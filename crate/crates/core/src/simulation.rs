//! Seeded Monte-Carlo harness.
//!
//! Trial `i` of a run with master seed `s` draws everything (truth first, then
//! channel noise) from `stream(s, Trial, i)`, so outcomes do not depend on the
//! scheduling of trials across workers. Aggregation is over integers only;
//! the means are formed by a single division at the end.

use std::collections::BTreeMap;
use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockcodes::{self, BlockCodeError, Codebook, DecodeOutcome};
use crate::channel::Dmc;
use crate::exact::{self, ExactError, ExponentFit};
use crate::feedback::{FeedbackError, Protocol, ProtocolKind, ProtocolParams, SampledChannel, Transcript};
use crate::rng::{self, Domain};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;
/// Event masks are `u64`, so an experiment has at most this many labels.
pub const MAX_LABELS: usize = 64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error("truth distribution '{0:?}' needs a special message class")]
    NoSpecialClass(TruthDistribution),
    #[error("ladder must be strictly increasing with at least 3 rungs, got {0:?}")]
    BadLadder(Vec<u64>),
    #[error("no events observed at n = {n} over {trials} trials; use more trials or exact mode")]
    ZeroEvents { n: u64, trials: u64 },
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    BlockCode(#[from] BlockCodeError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("cannot write transcripts: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot serialize: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// How the transmitted message of each trial is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TruthDistribution {
    /// Uniform over all messages (each layer uniform for layered codes).
    #[default]
    Uniform,
    /// Special or ordinary with probability 1/2, then uniform within the class.
    Balanced,
    /// Uniform over the special messages.
    Special,
    /// Uniform over the ordinary messages.
    Ordinary,
}

impl std::str::FromStr for TruthDistribution {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "uniform" => TruthDistribution::Uniform,
            "balanced" => TruthDistribution::Balanced,
            "special" => TruthDistribution::Special,
            "ordinary" => TruthDistribution::Ordinary,
            other => return Err(format!("unknown truth distribution '{other}'")),
        })
    }
}

/// Draws a message in `0..total` whose specials are `0..specials`.
fn draw_message(
    truth: TruthDistribution,
    specials: usize,
    total: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    let special = match truth {
        TruthDistribution::Uniform => return Ok(rng::below(rng, total)),
        _ if specials == 0 || specials >= total => return Err(SimError::NoSpecialClass(truth)),
        TruthDistribution::Balanced => rng::below(rng, 2) == 1,
        TruthDistribution::Special => true,
        TruthDistribution::Ordinary => false,
    };
    Ok(if special {
        rng::below(rng, specials)
    } else {
        specials + rng::below(rng, total - specials)
    })
}

/// Compact per-trial result; bit `j` of the masks refers to label `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub tau: u64,
    pub class: usize,
    pub eligible: u64,
    pub hit: u64,
}

impl TrialOutcome {
    fn new(tau: u64, class: usize) -> Self {
        Self {
            tau,
            class,
            eligible: 0,
            hit: 0,
        }
    }

    fn mark(&mut self, label: usize, eligible: bool, hit: bool) {
        if eligible {
            self.eligible |= 1 << label;
            if hit {
                self.hit |= 1 << label;
            }
        }
    }
}

/// A randomized experiment with named events and message classes.
pub trait Experiment: Sync {
    fn labels(&self) -> Vec<String>;
    fn classes(&self) -> Vec<String>;
    fn log_message_count(&self) -> f64;
    fn trial(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome>;
}

/// A feedback protocol under a truth distribution.
pub struct ProtocolExperiment {
    pub protocol: Protocol,
    pub w: Dmc,
    pub truth: TruthDistribution,
}

impl ProtocolExperiment {
    pub fn new(protocol: Protocol, w: &Dmc, truth: TruthDistribution) -> Result<Self> {
        let specials = protocol.special_count();
        if truth != TruthDistribution::Uniform && specials == 0 {
            return Err(SimError::NoSpecialClass(truth));
        }
        Ok(Self {
            protocol,
            w: w.clone(),
            truth,
        })
    }

    pub fn draw_truth(&self, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        let sizes = self.protocol.message_sizes();
        match self.protocol.special_count() {
            0 => Ok(sizes.iter().map(|&s| rng::below(rng, s)).collect()),
            s => Ok(vec![draw_message(self.truth, s, sizes[0], rng)?]),
        }
    }

    /// Full transcript of trial `index` under `seed`.
    pub fn transcript(&self, seed: u64, index: u64) -> Result<Transcript> {
        let mut rng = rng::stream(seed, Domain::Trial, index);
        self.run_with(&mut rng)
    }

    fn run_with(&self, rng: &mut ChaCha8Rng) -> Result<Transcript> {
        let truth = self.draw_truth(rng)?;
        let mut ch = SampledChannel::new(&self.w, rng);
        Ok(self.protocol.run(&truth, &mut ch)?)
    }

    fn layered(&self) -> bool {
        self.protocol.special_count() == 0
    }
}

impl Experiment for ProtocolExperiment {
    fn labels(&self) -> Vec<String> {
        let mut labels = vec!["error".to_string(), "restart".to_string()];
        match self.protocol.kind() {
            ProtocolKind::SpecialBit => {
                labels.push("bit_error".into());
                labels.push("payload_error".into());
            }
            ProtocolKind::Layered => {
                let layers = self.protocol.message_sizes().len();
                labels.extend((1..=layers).map(|i| format!("layer_{i}_error")));
            }
            ProtocolKind::ManyMessage | ProtocolKind::FalseAlarm => {
                labels.push("missed_detection".into());
                labels.push("false_alarm".into());
            }
        }
        labels
    }

    fn classes(&self) -> Vec<String> {
        if self.layered() {
            vec!["all".into()]
        } else {
            vec!["special".into(), "ordinary".into()]
        }
    }

    fn log_message_count(&self) -> f64 {
        self.protocol
            .message_sizes()
            .iter()
            .map(|&s| (s as f64).ln())
            .sum()
    }

    fn trial(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let t = self.run_with(rng)?;
        let specials = self.protocol.special_count();
        let special_truth = !self.layered() && t.truth[0] < specials;
        let mut out = TrialOutcome::new(t.tau, if self.layered() || special_truth { 0 } else { 1 });
        out.mark(0, true, t.decoded != t.truth);
        out.mark(1, true, t.restarts > 0);
        if self.layered() {
            for (i, (d, m)) in t.decoded.iter().zip(&t.truth).enumerate() {
                out.mark(2 + i, true, d != m);
            }
        } else {
            let decoded_special = t.decoded[0] < specials;
            out.mark(2, special_truth, t.decoded != t.truth);
            out.mark(3, !special_truth, decoded_special);
        }
        Ok(out)
    }
}

/// The fixed-length special-message code: red-alert codeword plus random ordinaries.
pub struct SpecialMessageExperiment {
    pub code: Codebook,
    pub w: Dmc,
    pub truth: TruthDistribution,
}

impl SpecialMessageExperiment {
    pub fn new(
        w: &Dmc,
        n: usize,
        num_ordinary: usize,
        delta: Option<f64>,
        code_seed: u64,
        truth: TruthDistribution,
    ) -> Result<Self> {
        let mut code = blockcodes::build_special_message_code(w, n, num_ordinary, code_seed)?;
        if let Some(d) = delta {
            code = code.with_radius(d)?;
        }
        Ok(Self {
            code,
            w: w.clone(),
            truth,
        })
    }
}

impl Experiment for SpecialMessageExperiment {
    fn labels(&self) -> Vec<String> {
        ["error", "missed_detection", "false_alarm"]
            .map(String::from)
            .to_vec()
    }

    fn classes(&self) -> Vec<String> {
        vec!["special".into(), "ordinary".into()]
    }

    fn log_message_count(&self) -> f64 {
        (self.code.size() as f64).ln()
    }

    fn trial(&self, rng: &mut ChaCha8Rng) -> Result<TrialOutcome> {
        let m = draw_message(self.truth, 1, self.code.size(), rng)?;
        let y: Vec<usize> = self.code.codewords[m]
            .iter()
            .map(|&x| rng::channel_sample(&self.w, x, rng))
            .collect();
        let decoded = match blockcodes::decode(&y, &self.code, &self.w)? {
            DecodeOutcome::Message(d) => Some(d),
            DecodeOutcome::Erasure => None,
        };
        let special = m == 0;
        let mut out = TrialOutcome::new(self.code.n as u64, if special { 0 } else { 1 });
        out.mark(0, true, decoded != Some(m));
        out.mark(1, special, decoded != Some(0));
        out.mark(2, !special, decoded == Some(0));
        Ok(out)
    }
}

/// Serializable description of an experiment, echoed in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Protocol {
        protocol: ProtocolKind,
        params: ProtocolParams,
        truth: TruthDistribution,
    },
    SpecialMessageCode {
        n: usize,
        num_ordinary: usize,
        delta: Option<f64>,
        code_seed: u64,
        truth: TruthDistribution,
    },
}

impl ExperimentSpec {
    pub fn build(&self, w: &Dmc) -> Result<Box<dyn Experiment>> {
        Ok(match self {
            ExperimentSpec::Protocol {
                protocol,
                params,
                truth,
            } => Box::new(ProtocolExperiment::new(
                Protocol::build(*protocol, w, params)?,
                w,
                *truth,
            )?),
            ExperimentSpec::SpecialMessageCode {
                n,
                num_ordinary,
                delta,
                code_seed,
                truth,
            } => Box::new(SpecialMessageExperiment::new(
                w,
                *n,
                *num_ordinary,
                *delta,
                *code_seed,
                *truth,
            )?),
        })
    }
}

/// Outcomes of trials `0..trials`, in trial order.
pub fn trial_outcomes(exp: &dyn Experiment, trials: u64, seed: u64) -> Result<Vec<TrialOutcome>> {
    (0..trials)
        .into_par_iter()
        .map(|i| exp.trial(&mut rng::stream(seed, Domain::Trial, i)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub channel: Vec<Vec<f64>>,
    pub experiment: ExperimentSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: Option<ReportConfig>,
    pub trials: u64,
    pub master_seed: u64,
    pub tau_sum: u64,
    pub mean_tau: f64,
    pub class_trials: BTreeMap<String, u64>,
    pub class_mean_tau: BTreeMap<String, f64>,
    /// Largest per-class mean delay over the overall mean delay.
    pub gamma_hat: f64,
    pub log_message_count: f64,
    /// `ln|M| / E[tau]`.
    pub rate_hat: f64,
    pub conditional_error_counts: BTreeMap<String, u64>,
    /// Trials on which each event could occur.
    pub eligible_counts: BTreeMap<String, u64>,
    /// `None` when no trial was eligible.
    pub event_rates: BTreeMap<String, Option<f64>>,
    pub wilson_intervals: BTreeMap<String, (f64, f64)>,
}

impl SimReport {
    pub fn count(&self, label: &str) -> u64 {
        self.conditional_error_counts.get(label).copied().unwrap_or(0)
    }

    pub fn rate(&self, label: &str) -> Option<f64> {
        self.event_rates.get(label).copied().flatten()
    }

    pub fn interval(&self, label: &str) -> (f64, f64) {
        self.wilson_intervals.get(label).copied().unwrap_or((0.0, 1.0))
    }
}

/// Wilson score interval at [`WILSON_Z`]; `[0, min(1, 3/n)]` for zero counts.
pub fn wilson_interval(count: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    if count == 0 {
        return (0.0, (3.0 / nf).min(1.0));
    }
    let p = count as f64 / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Aggregates outcomes; the result does not depend on their order.
pub fn aggregate(exp: &dyn Experiment, outcomes: &[TrialOutcome], seed: u64) -> SimReport {
    let labels = exp.labels();
    let classes = exp.classes();
    let mut hits = vec![0u64; labels.len()];
    let mut eligible = vec![0u64; labels.len()];
    let mut class_n = vec![0u64; classes.len()];
    let mut class_tau = vec![0u64; classes.len()];
    for o in outcomes {
        class_n[o.class] += 1;
        class_tau[o.class] += o.tau;
        for j in 0..labels.len() {
            eligible[j] += (o.eligible >> j) & 1;
            hits[j] += (o.hit >> j) & 1;
        }
    }
    let trials = outcomes.len() as u64;
    let tau_sum: u64 = class_tau.iter().sum();
    let mean_tau = tau_sum as f64 / trials as f64;
    let class_mean: Vec<Option<f64>> = class_n
        .iter()
        .zip(&class_tau)
        .map(|(&n, &t)| (n > 0).then(|| t as f64 / n as f64))
        .collect();
    let gamma_hat = class_mean
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        / mean_tau;
    let log_message_count = exp.log_message_count();
    let named = |v: &[u64]| -> BTreeMap<String, u64> {
        labels.iter().cloned().zip(v.iter().copied()).collect()
    };
    SimReport {
        config: None,
        trials,
        master_seed: seed,
        tau_sum,
        mean_tau,
        class_trials: classes.iter().cloned().zip(class_n.iter().copied()).collect(),
        class_mean_tau: classes
            .iter()
            .cloned()
            .zip(class_mean)
            .filter_map(|(c, m)| m.map(|m| (c, m)))
            .collect(),
        gamma_hat,
        log_message_count,
        rate_hat: log_message_count / mean_tau,
        conditional_error_counts: named(&hits),
        eligible_counts: named(&eligible),
        event_rates: labels
            .iter()
            .enumerate()
            .map(|(j, l)| (l.clone(), (eligible[j] > 0).then(|| hits[j] as f64 / eligible[j] as f64)))
            .collect(),
        wilson_intervals: labels
            .iter()
            .enumerate()
            .map(|(j, l)| (l.clone(), wilson_interval(hits[j], eligible[j])))
            .collect(),
    }
}

/// Runs `trials` seeded trials on the current rayon pool and aggregates them.
pub fn run_experiment(exp: &dyn Experiment, trials: u64, seed: u64) -> Result<SimReport> {
    if trials == 0 {
        return Err(SimError::ZeroTrials);
    }
    let outcomes = trial_outcomes(exp, trials, seed)?;
    Ok(aggregate(exp, &outcomes, seed))
}

/// Builds the experiment, runs it and echoes the configuration in the report.
pub fn run_spec(w: &Dmc, spec: &ExperimentSpec, trials: u64, seed: u64) -> Result<SimReport> {
    let exp = spec.build(w)?;
    let mut report = run_experiment(exp.as_ref(), trials, seed)?;
    report.config = Some(ReportConfig {
        channel: w.to_rows(),
        experiment: spec.clone(),
    });
    Ok(report)
}

/// Writes one JSON transcript per line for trials `0..trials`.
pub fn write_transcripts(
    exp: &ProtocolExperiment,
    trials: u64,
    seed: u64,
    out: &mut impl Write,
) -> Result<()> {
    let transcripts: Vec<Transcript> = (0..trials)
        .into_par_iter()
        .map(|i| exp.transcript(seed, i))
        .collect::<Result<_>>()?;
    for t in &transcripts {
        serde_json::to_writer(&mut *out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SeriesMode {
    Exact,
    MonteCarlo { trials: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: u64,
    pub ln_probability: f64,
    /// `-ln p / n`.
    pub exponent: f64,
    /// Observed events, Monte-Carlo mode only.
    pub count: Option<u64>,
    /// Standard error of `ln p`; zero in exact mode.
    pub ln_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSeries {
    pub points: Vec<SeriesPoint>,
    pub fit: ExponentFit,
    /// Slope standard error from the per-rung sampling errors; zero in exact mode.
    pub sampling_stderr: f64,
}

fn check_ladder(ladder: &[u64]) -> Result<()> {
    if ladder.len() < 3 || ladder.windows(2).any(|p| p[0] >= p[1]) || ladder[0] == 0 {
        return Err(SimError::BadLadder(ladder.to_vec()));
    }
    Ok(())
}

/// Missed-detection probability of the special-message code with fixed radius
/// `delta` over a ladder of block lengths, and the fitted exponent.
pub fn missed_detection_series(
    w: &Dmc,
    delta: f64,
    ladder: &[u64],
    mode: SeriesMode,
) -> Result<ExponentSeries> {
    check_ladder(ladder)?;
    let mut points = Vec::with_capacity(ladder.len());
    for &n in ladder {
        points.push(match mode {
            SeriesMode::Exact => {
                let p = exact::exact_missed_detection(w, n, delta)?;
                SeriesPoint {
                    n,
                    ln_probability: p.ln_probability,
                    exponent: p.exponent(n),
                    count: None,
                    ln_stderr: 0.0,
                }
            }
            SeriesMode::MonteCarlo { trials, seed } => {
                let exp = SpecialMessageExperiment::new(
                    w,
                    n as usize,
                    1,
                    Some(delta),
                    seed,
                    TruthDistribution::Special,
                )?;
                let report = run_experiment(&exp, trials, seed)?;
                let count = report.count("missed_detection");
                if count == 0 {
                    return Err(SimError::ZeroEvents { n, trials });
                }
                let p = count as f64 / trials as f64;
                SeriesPoint {
                    n,
                    ln_probability: p.ln(),
                    exponent: -p.ln() / n as f64,
                    count: Some(count),
                    ln_stderr: ((1.0 - p) / count as f64).sqrt(),
                }
            }
        });
    }
    series_from_points(points)
}

/// Fits a series and propagates per-rung `ln p` errors to the slope.
pub fn series_from_points(points: Vec<SeriesPoint>) -> Result<ExponentSeries> {
    let ns: Vec<u64> = points.iter().map(|p| p.n).collect();
    let ln: Vec<f64> = points.iter().map(|p| p.ln_probability).collect();
    let fit = exact::fit_log_exponent(&ns, &ln)?;
    let mean = ns.iter().map(|&n| n as f64).sum::<f64>() / ns.len() as f64;
    let sxx: f64 = ns.iter().map(|&n| (n as f64 - mean).powi(2)).sum();
    let sampling_stderr = points
        .iter()
        .map(|p| ((p.n as f64 - mean) / sxx * p.ln_stderr).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ExponentSeries {
        points,
        fit,
        sampling_stderr,
    })
}
