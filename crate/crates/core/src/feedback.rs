//! Variable-length feedback protocols with erasure-triggered restarts.
//!
//! The transmitter sees every channel output through noiseless feedback, so it
//! knows each tentative decision of the receiver as soon as it is made. Every
//! attempt has a fixed total length; an erasure restarts the whole attempt.
//! The channel is only accessed through [`ChannelSource::transmit`], one use at
//! a time and in time order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Dmc;
use crate::exact::in_sup_ball;
use crate::exponents::{self, ExponentError, REFERENCE_TOL};
use crate::ml::PackedCode;
use crate::rng::{self, Domain, UniformSource};

pub const DEFAULT_RHO: f64 = 0.8;
/// Largest random sub-code; keeps ML decoding tractable.
pub const MAX_SUBCODE_SIZE: usize = 1 << 16;
/// Restarts allowed per trial before the run is abandoned.
pub const RESTART_CAP: u32 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeedbackError {
    #[error("base length k must be at least 2, got {0}")]
    BaseLength(usize),
    #[error("rate {0} must be positive and finite")]
    BadRate(f64),
    #[error("rates sum to {sum}, above capacity {capacity}")]
    RatesExceedCapacity { sum: f64, capacity: f64 },
    #[error("protocol needs {expected} rate(s), got {got}")]
    RateCount { expected: String, got: usize },
    #[error("phase '{phase}' would have length {len}")]
    EmptyPhase { phase: &'static str, len: usize },
    #[error("rho must lie in (0, 1], got {0}")]
    BadRho(f64),
    #[error("radius must be nonnegative, got {0}")]
    BadRadius(f64),
    #[error("special message count must be at least 1")]
    NoSpecials,
    #[error("special message count {0} exceeds the sub-code cap")]
    TooManySpecials(usize),
    #[error("channel has zero capacity or no distinguishable input pair")]
    DegenerateChannel,
    #[error("input alphabet of {0} letters is larger than 256")]
    TooManyInputs(usize),
    #[error("truth {truth:?} does not fit message sizes {sizes:?}")]
    BadTruth { truth: Vec<usize>, sizes: Vec<usize> },
    #[error("gave up after {0} restarts")]
    RestartCap(u32),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

pub type Result<T> = std::result::Result<T, FeedbackError>;

/// One channel use at a time.
pub trait ChannelSource {
    fn transmit(&mut self, x: usize) -> usize;
}

/// A memoryless channel driven by a uniform source.
pub struct SampledChannel<'a, S> {
    w: &'a Dmc,
    source: S,
}

impl<'a, S: UniformSource> SampledChannel<'a, S> {
    pub fn new(w: &'a Dmc, source: S) -> Self {
        Self { w, source }
    }
}

impl<S: UniformSource> ChannelSource for SampledChannel<'_, S> {
    fn transmit(&mut self, x: usize) -> usize {
        rng::channel_sample(self.w, x, &mut self.source)
    }
}

/// Wraps a source and records every `(input, output)` pair in access order.
pub struct RecordingChannel<C> {
    pub inner: C,
    pub log: Vec<(usize, usize)>,
}

impl<C> RecordingChannel<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            log: Vec::new(),
        }
    }
}

impl<C: ChannelSource> ChannelSource for RecordingChannel<C> {
    fn transmit(&mut self, x: usize) -> usize {
        let y = self.inner.transmit(x);
        self.log.push((x, y));
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    SpecialBit,
    Layered,
    ManyMessage,
    FalseAlarm,
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "special_bit" => ProtocolKind::SpecialBit,
            "layered" => ProtocolKind::Layered,
            "many_message" => ProtocolKind::ManyMessage,
            "false_alarm" => ProtocolKind::FalseAlarm,
            other => return Err(format!("unknown protocol '{other}'")),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Base block length.
    pub k: usize,
    /// Layer rates for the layered protocol, or the communication rate of the
    /// many-message protocol, in nats.
    pub rates: Vec<f64>,
    pub special_count: usize,
    /// Indicator / repetition phase length; `ceil(sqrt(k))` when absent.
    pub phase1_len: Option<usize>,
    /// Fixed typicality radius; `len^{-1/4}` of each checked phase when absent.
    pub typicality_radius: Option<f64>,
    /// Sub-codes carry `rho * C` nats per channel use.
    pub rho: f64,
    /// Seed of the sub-code codebooks.
    pub seed: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            k: 256,
            rates: Vec::new(),
            special_count: 16,
            phase1_len: None,
            typicality_radius: None,
            rho: DEFAULT_RHO,
            seed: 0,
        }
    }
}

impl ProtocolParams {
    pub fn phase1(&self) -> usize {
        self.phase1_len
            .unwrap_or_else(|| (self.k as f64).sqrt().ceil() as usize)
    }

    fn check(&self) -> Result<()> {
        if self.k < 2 {
            return Err(FeedbackError::BaseLength(self.k));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(FeedbackError::BadRho(self.rho));
        }
        if let Some(r) = self.typicality_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(FeedbackError::BadRadius(r));
            }
        }
        if self.phase1() == 0 {
            return Err(FeedbackError::EmptyPhase {
                phase: "indicator",
                len: 0,
            });
        }
        Ok(())
    }
}

/// `min(2^16, max(2, floor(e^{rho C len})))`.
pub fn subcode_size(capacity: f64, len: usize, rho: f64) -> usize {
    let m = (rho * capacity * len as f64).exp().floor();
    if m >= MAX_SUBCODE_SIZE as f64 {
        MAX_SUBCODE_SIZE
    } else {
        (m as usize).max(2)
    }
}

/// A fixed-length sub-code: either a seeded random code or a repetition code.
#[derive(Clone, Debug)]
pub struct SubCode {
    len: usize,
    size: usize,
    letters: Vec<u8>,
    packed: PackedCode,
}

impl SubCode {
    /// `size` codewords of length `len` drawn i.i.d. from `input_cdf`.
    pub fn random(inputs: usize, input_cdf: &[f64], len: usize, size: usize, seed: u64, index: u64) -> Self {
        let mut rng = rng::stream(seed, Domain::SubCode, index);
        let letters: Vec<u8> = (0..len * size)
            .map(|_| rng::sample_cdf(input_cdf, rng.uniform()) as u8)
            .collect();
        Self::from_letters(inputs, len, size, letters)
    }

    /// Codeword `m` is `letters[m]` repeated `len` times.
    pub fn repetition(inputs: usize, len: usize, letters: &[usize]) -> Self {
        let flat: Vec<u8> = letters
            .iter()
            .flat_map(|&a| std::iter::repeat_n(a as u8, len))
            .collect();
        Self::from_letters(inputs, len, letters.len(), flat)
    }

    fn from_letters(inputs: usize, len: usize, size: usize, letters: Vec<u8>) -> Self {
        let packed = PackedCode::from_fn(size, len, inputs, |m, t| letters[m * len + t] as usize);
        Self {
            len,
            size,
            letters,
            packed,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn letter(&self, m: usize, t: usize) -> usize {
        self.letters[m * self.len + t] as usize
    }

    pub fn codeword(&self, m: usize) -> Vec<usize> {
        (0..self.len).map(|t| self.letter(m, t)).collect()
    }

    pub fn decode(&self, y: &[usize], w: &Dmc) -> usize {
        self.packed.decode(y, w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Repetition-coded bit (special bit, or special/ordinary indicator).
    Indicator,
    Layer,
    Ordinary,
    Communication,
    Control,
    Confirm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sent {
    Codeword(usize),
    Repeat(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub role: Role,
    pub len: usize,
    pub sent: Sent,
    /// Receiver's tentative decision for coded phases.
    pub decision: Option<usize>,
    /// Typicality verdict for checked phases.
    pub typical: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub phases: Vec<PhaseRecord>,
    pub erased: bool,
}

impl Attempt {
    pub fn len(&self) -> u64 {
        self.phases.iter().map(|p| p.len as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

/// One run to completion. `tau` equals the summed phase lengths over all attempts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub tau: u64,
    pub restarts: u32,
    pub decoded: Vec<usize>,
    pub truth: Vec<usize>,
    #[serde(rename = "events")]
    pub attempts: Vec<Attempt>,
}

impl Transcript {
    pub fn last_attempt(&self) -> &Attempt {
        self.attempts.last().expect("at least one attempt")
    }
}

fn send<C: ChannelSource>(
    ch: &mut C,
    len: usize,
    letter: impl Fn(usize) -> usize,
) -> Vec<usize> {
    (0..len).map(|t| ch.transmit(letter(t))).collect()
}

fn output_counts(y: &[usize], outputs: usize) -> Vec<u64> {
    let mut counts = vec![0u64; outputs];
    for &b in y {
        counts[b] += 1;
    }
    counts
}

/// Letters and laws shared by all protocols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConstants {
    pub capacity: f64,
    pub x_r: usize,
    pub x_a: usize,
    pub x_d: usize,
    pub input_cdf: Vec<f64>,
    pub output_dist: Vec<f64>,
}

impl ChannelConstants {
    pub fn new(w: &Dmc) -> Result<Self> {
        if w.inputs() > 256 {
            return Err(FeedbackError::TooManyInputs(w.inputs()));
        }
        let cap = exponents::capacity(w, REFERENCE_TOL)?;
        let dm = exponents::d_max(w);
        if cap.capacity <= 0.0 || dm.value <= 0.0 {
            return Err(FeedbackError::DegenerateChannel);
        }
        Ok(Self {
            capacity: cap.capacity,
            x_r: exponents::red_alert_from(w, &cap).letter,
            x_a: dm.x_a,
            x_d: dm.x_d,
            input_cdf: rng::cdf_of(cap.input_dist.weights()),
            output_dist: cap.output_dist.weights().to_vec(),
        })
    }
}

fn radius_for(fixed: Option<f64>, len: usize) -> f64 {
    fixed.unwrap_or_else(|| (len as f64).powf(-0.25))
}

/// Successive phases, each decoded tentatively. After the first wrong tentative
/// decision the transmitter sends `x_r` for the rest of the attempt; the attempt
/// is erased if any phase after the first has an output type outside the
/// `P_Y*` ball.
#[derive(Clone, Debug)]
pub struct LayeredProtocol {
    w: Dmc,
    constants: ChannelConstants,
    phases: Vec<SubCode>,
    radius: Option<f64>,
}

impl LayeredProtocol {
    /// Bit by repetition of `(x_d, x_a)` over `phase1` uses, then a payload code of length `k`.
    pub fn special_bit(w: &Dmc, params: &ProtocolParams) -> Result<Self> {
        params.check()?;
        let constants = ChannelConstants::new(w)?;
        let bit = SubCode::repetition(w.inputs(), params.phase1(), &[constants.x_d, constants.x_a]);
        let size = subcode_size(constants.capacity, params.k, params.rho);
        let payload = SubCode::random(w.inputs(), &constants.input_cdf, params.k, size, params.seed, 0);
        Self::from_phases(w, vec![bit, payload], params.typicality_radius)
    }

    /// One random sub-code per layer, of length `ceil(r_i k / C)`.
    pub fn layered(w: &Dmc, params: &ProtocolParams) -> Result<Self> {
        params.check()?;
        let constants = ChannelConstants::new(w)?;
        if params.rates.is_empty() {
            return Err(FeedbackError::RateCount {
                expected: "at least 1".into(),
                got: 0,
            });
        }
        check_rates(&params.rates, constants.capacity)?;
        let phases = params
            .rates
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let len = (r / constants.capacity * params.k as f64).ceil() as usize;
                let size = subcode_size(constants.capacity, len, params.rho);
                SubCode::random(w.inputs(), &constants.input_cdf, len, size, params.seed, i as u64)
            })
            .collect();
        Self::from_phases(w, phases, params.typicality_radius)
    }

    pub fn from_phases(w: &Dmc, phases: Vec<SubCode>, radius: Option<f64>) -> Result<Self> {
        let constants = ChannelConstants::new(w)?;
        if let Some(p) = phases.iter().find(|p| p.is_empty()) {
            return Err(FeedbackError::EmptyPhase {
                phase: "layer",
                len: p.len(),
            });
        }
        Ok(Self {
            w: w.clone(),
            constants,
            phases,
            radius,
        })
    }

    pub fn phases(&self) -> &[SubCode] {
        &self.phases
    }

    pub fn constants(&self) -> &ChannelConstants {
        &self.constants
    }

    pub fn message_sizes(&self) -> Vec<usize> {
        self.phases.iter().map(SubCode::size).collect()
    }

    pub fn attempt_len(&self) -> u64 {
        self.phases.iter().map(|p| p.len() as u64).sum()
    }

    pub fn run<C: ChannelSource>(&self, truth: &[usize], ch: &mut C) -> Result<Transcript> {
        check_truth(truth, &self.message_sizes())?;
        let ny = self.w.outputs();
        let mut attempts = Vec::new();
        loop {
            let mut wrong = false;
            let mut erased = false;
            let mut phases = Vec::with_capacity(self.phases.len());
            let mut decisions = Vec::with_capacity(self.phases.len());
            for (i, code) in self.phases.iter().enumerate() {
                let sent = if wrong {
                    Sent::Repeat(self.constants.x_r)
                } else {
                    Sent::Codeword(truth[i])
                };
                let y = match sent {
                    Sent::Codeword(m) => send(ch, code.len(), |t| code.letter(m, t)),
                    Sent::Repeat(a) => send(ch, code.len(), |_| a),
                };
                let decision = code.decode(&y, &self.w);
                let typical = (i > 0).then(|| {
                    in_sup_ball(
                        &output_counts(&y, ny),
                        &self.constants.output_dist,
                        radius_for(self.radius, code.len()),
                    )
                });
                erased |= typical == Some(false);
                wrong |= decision != truth[i];
                decisions.push(decision);
                phases.push(PhaseRecord {
                    role: if i == 0 && code.size() == 2 && is_repetition(code) {
                        Role::Indicator
                    } else {
                        Role::Layer
                    },
                    len: code.len(),
                    sent,
                    decision: Some(decision),
                    typical,
                });
            }
            attempts.push(Attempt { phases, erased });
            if !erased {
                return Ok(finish(attempts, decisions, truth));
            }
            if attempts.len() as u32 > RESTART_CAP {
                return Err(FeedbackError::RestartCap(RESTART_CAP));
            }
        }
    }
}

fn is_repetition(code: &SubCode) -> bool {
    (0..code.size()).all(|m| (1..code.len()).all(|t| code.letter(m, t) == code.letter(m, 0)))
}

fn finish(attempts: Vec<Attempt>, decoded: Vec<usize>, truth: &[usize]) -> Transcript {
    Transcript {
        tau: attempts.iter().map(Attempt::len).sum(),
        restarts: attempts.len() as u32 - 1,
        decoded,
        truth: truth.to_vec(),
        attempts,
    }
}

fn check_truth(truth: &[usize], sizes: &[usize]) -> Result<()> {
    if truth.len() != sizes.len() || truth.iter().zip(sizes).any(|(t, s)| t >= s) {
        return Err(FeedbackError::BadTruth {
            truth: truth.to_vec(),
            sizes: sizes.to_vec(),
        });
    }
    Ok(())
}

fn check_rates(rates: &[f64], capacity: f64) -> Result<()> {
    if let Some(&r) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(FeedbackError::BadRate(r));
    }
    let sum: f64 = rates.iter().sum();
    if sum > capacity * (1.0 + 1e-12) {
        return Err(FeedbackError::RatesExceedCapacity { sum, capacity });
    }
    Ok(())
}

/// Specials `0..S` and ordinaries `S..S+O`. An indicator bit selects either an
/// ordinary code with a `P_Y*` typicality check, or a communication phase over
/// `S + 1` codewords (index 0 is the ordinary dummy) followed by a control
/// phase of `x_a` (accept) or `x_d` (reject).
#[derive(Clone, Debug)]
pub struct ManyMessageProtocol {
    w: Dmc,
    constants: ChannelConstants,
    specials: usize,
    indicator: SubCode,
    ordinary: SubCode,
    communication: SubCode,
    control_len: usize,
    radius: Option<f64>,
}

impl ManyMessageProtocol {
    pub fn new(w: &Dmc, params: &ProtocolParams) -> Result<Self> {
        params.check()?;
        let constants = ChannelConstants::new(w)?;
        if params.rates.len() != 1 {
            return Err(FeedbackError::RateCount {
                expected: "exactly 1".into(),
                got: params.rates.len(),
            });
        }
        check_rates(&params.rates, constants.capacity)?;
        if params.special_count == 0 {
            return Err(FeedbackError::NoSpecials);
        }
        if params.special_count >= MAX_SUBCODE_SIZE {
            return Err(FeedbackError::TooManySpecials(params.special_count));
        }
        let k = params.k;
        let comm_len = (params.rates[0] / constants.capacity * k as f64).ceil() as usize;
        let control_len = k.saturating_sub(comm_len);
        if control_len == 0 {
            return Err(FeedbackError::EmptyPhase {
                phase: "control",
                len: 0,
            });
        }
        let inputs = w.inputs();
        let indicator = SubCode::repetition(inputs, params.phase1(), &[constants.x_d, constants.x_a]);
        let size = subcode_size(constants.capacity, k, params.rho);
        let ordinary = SubCode::random(inputs, &constants.input_cdf, k, size, params.seed, 0);
        let communication = SubCode::random(
            inputs,
            &constants.input_cdf,
            comm_len,
            params.special_count + 1,
            params.seed,
            1,
        );
        Ok(Self {
            w: w.clone(),
            constants,
            specials: params.special_count,
            indicator,
            ordinary,
            communication,
            control_len,
            radius: params.typicality_radius,
        })
    }

    pub fn specials(&self) -> usize {
        self.specials
    }

    pub fn message_count(&self) -> usize {
        self.specials + self.ordinary.size()
    }

    pub fn constants(&self) -> &ChannelConstants {
        &self.constants
    }

    pub fn control_len(&self) -> usize {
        self.control_len
    }

    pub fn indicator_len(&self) -> usize {
        self.indicator.len()
    }

    /// Radius of the `W(.|x_a)` ball checked in the control phase.
    pub fn control_radius(&self) -> f64 {
        radius_for(self.radius, self.control_len)
    }

    pub fn attempt_len(&self) -> u64 {
        (self.indicator.len() + self.ordinary.len()) as u64
    }

    pub fn run<C: ChannelSource>(&self, truth: usize, ch: &mut C) -> Result<Transcript> {
        check_truth(&[truth], &[self.message_count()])?;
        let ny = self.w.outputs();
        let c = &self.constants;
        let special = truth < self.specials;
        let mut attempts = Vec::new();
        loop {
            let bit = special as usize;
            let y = send(ch, self.indicator.len(), |t| self.indicator.letter(bit, t));
            let b_hat = self.indicator.decode(&y, &self.w);
            let mut phases = vec![PhaseRecord {
                role: Role::Indicator,
                len: self.indicator.len(),
                sent: Sent::Codeword(bit),
                decision: Some(b_hat),
                typical: None,
            }];
            let decoded = if b_hat == 0 {
                let sent = if special {
                    Sent::Repeat(c.x_r)
                } else {
                    Sent::Codeword(truth - self.specials)
                };
                let code = &self.ordinary;
                let y = match sent {
                    Sent::Codeword(m) => send(ch, code.len(), |t| code.letter(m, t)),
                    Sent::Repeat(a) => send(ch, code.len(), |_| a),
                };
                let d = code.decode(&y, &self.w);
                let typical = in_sup_ball(
                    &output_counts(&y, ny),
                    &c.output_dist,
                    radius_for(self.radius, code.len()),
                );
                phases.push(PhaseRecord {
                    role: Role::Ordinary,
                    len: code.len(),
                    sent,
                    decision: Some(d),
                    typical: Some(typical),
                });
                typical.then_some(self.specials + d)
            } else {
                let target = if special { truth + 1 } else { 0 };
                let code = &self.communication;
                let y = send(ch, code.len(), |t| code.letter(target, t));
                let a_hat = code.decode(&y, &self.w);
                phases.push(PhaseRecord {
                    role: Role::Communication,
                    len: code.len(),
                    sent: Sent::Codeword(target),
                    decision: Some(a_hat),
                    typical: None,
                });
                let letter = if a_hat == target { c.x_a } else { c.x_d };
                let y = send(ch, self.control_len, |_| letter);
                let accept = in_sup_ball(
                    &output_counts(&y, ny),
                    self.w.row(c.x_a).weights(),
                    self.control_radius(),
                );
                phases.push(PhaseRecord {
                    role: Role::Control,
                    len: self.control_len,
                    sent: Sent::Repeat(letter),
                    decision: None,
                    typical: Some(accept),
                });
                (accept && a_hat != 0).then(|| a_hat - 1)
            };
            attempts.push(Attempt {
                phases,
                erased: decoded.is_none(),
            });
            if let Some(m) = decoded {
                return Ok(finish(attempts, vec![m], &[truth]));
            }
            if attempts.len() as u32 > RESTART_CAP {
                return Err(FeedbackError::RestartCap(RESTART_CAP));
            }
        }
    }
}

/// Special message 0 and ordinaries `1..=O`. After the indicator bit, `b_hat = 1`
/// sends `x_a^k` (special) or `x_d^k` (ordinary) and decodes the special iff the
/// output is `W(.|x_a)`-typical; `b_hat = 0` runs the red-alert code and erases
/// when its decoder would return the special message.
#[derive(Clone, Debug)]
pub struct FalseAlarmProtocol {
    w: Dmc,
    constants: ChannelConstants,
    indicator: SubCode,
    ordinary: SubCode,
    radius: Option<f64>,
}

impl FalseAlarmProtocol {
    pub fn new(w: &Dmc, params: &ProtocolParams) -> Result<Self> {
        params.check()?;
        let constants = ChannelConstants::new(w)?;
        let inputs = w.inputs();
        let indicator = SubCode::repetition(inputs, params.phase1(), &[constants.x_d, constants.x_a]);
        let size = subcode_size(constants.capacity, params.k, params.rho);
        let ordinary = SubCode::random(inputs, &constants.input_cdf, params.k, size, params.seed, 0);
        Ok(Self {
            w: w.clone(),
            constants,
            indicator,
            ordinary,
            radius: params.typicality_radius,
        })
    }

    pub fn message_count(&self) -> usize {
        1 + self.ordinary.size()
    }

    pub fn constants(&self) -> &ChannelConstants {
        &self.constants
    }

    pub fn k(&self) -> usize {
        self.ordinary.len()
    }

    pub fn indicator_len(&self) -> usize {
        self.indicator.len()
    }

    /// Radius of the `W(.|x_a)` ball checked after `b_hat = 1`.
    pub fn confirm_radius(&self) -> f64 {
        radius_for(self.radius, self.ordinary.len())
    }

    pub fn attempt_len(&self) -> u64 {
        (self.indicator.len() + self.ordinary.len()) as u64
    }

    pub fn run<C: ChannelSource>(&self, truth: usize, ch: &mut C) -> Result<Transcript> {
        check_truth(&[truth], &[self.message_count()])?;
        let ny = self.w.outputs();
        let c = &self.constants;
        let special = truth == 0;
        let k = self.ordinary.len();
        let mut attempts = Vec::new();
        loop {
            let bit = special as usize;
            let y = send(ch, self.indicator.len(), |t| self.indicator.letter(bit, t));
            let b_hat = self.indicator.decode(&y, &self.w);
            let mut phases = vec![PhaseRecord {
                role: Role::Indicator,
                len: self.indicator.len(),
                sent: Sent::Codeword(bit),
                decision: Some(b_hat),
                typical: None,
            }];
            let decoded = if b_hat == 1 {
                let letter = if special { c.x_a } else { c.x_d };
                let y = send(ch, k, |_| letter);
                let typical = in_sup_ball(
                    &output_counts(&y, ny),
                    self.w.row(c.x_a).weights(),
                    self.confirm_radius(),
                );
                phases.push(PhaseRecord {
                    role: Role::Confirm,
                    len: k,
                    sent: Sent::Repeat(letter),
                    decision: None,
                    typical: Some(typical),
                });
                typical.then_some(0)
            } else {
                let sent = if special {
                    Sent::Repeat(c.x_r)
                } else {
                    Sent::Codeword(truth - 1)
                };
                let code = &self.ordinary;
                let y = match sent {
                    Sent::Codeword(m) => send(ch, k, |t| code.letter(m, t)),
                    Sent::Repeat(a) => send(ch, k, |_| a),
                };
                let d = code.decode(&y, &self.w);
                let typical = in_sup_ball(
                    &output_counts(&y, ny),
                    &c.output_dist,
                    radius_for(self.radius, k),
                );
                phases.push(PhaseRecord {
                    role: Role::Ordinary,
                    len: k,
                    sent,
                    decision: Some(d),
                    typical: Some(typical),
                });
                typical.then_some(1 + d)
            };
            attempts.push(Attempt {
                phases,
                erased: decoded.is_none(),
            });
            if let Some(m) = decoded {
                return Ok(finish(attempts, vec![m], &[truth]));
            }
            if attempts.len() as u32 > RESTART_CAP {
                return Err(FeedbackError::RestartCap(RESTART_CAP));
            }
        }
    }
}

/// Any of the protocols, built from a kind and parameters.
#[derive(Clone, Debug)]
pub enum Protocol {
    SpecialBit(LayeredProtocol),
    Layered(LayeredProtocol),
    ManyMessage(ManyMessageProtocol),
    FalseAlarm(FalseAlarmProtocol),
}

impl Protocol {
    pub fn build(kind: ProtocolKind, w: &Dmc, params: &ProtocolParams) -> Result<Self> {
        Ok(match kind {
            ProtocolKind::SpecialBit => Protocol::SpecialBit(LayeredProtocol::special_bit(w, params)?),
            ProtocolKind::Layered => Protocol::Layered(LayeredProtocol::layered(w, params)?),
            ProtocolKind::ManyMessage => Protocol::ManyMessage(ManyMessageProtocol::new(w, params)?),
            ProtocolKind::FalseAlarm => Protocol::FalseAlarm(FalseAlarmProtocol::new(w, params)?),
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        match self {
            Protocol::SpecialBit(_) => ProtocolKind::SpecialBit,
            Protocol::Layered(_) => ProtocolKind::Layered,
            Protocol::ManyMessage(_) => ProtocolKind::ManyMessage,
            Protocol::FalseAlarm(_) => ProtocolKind::FalseAlarm,
        }
    }

    /// Size of each message component.
    pub fn message_sizes(&self) -> Vec<usize> {
        match self {
            Protocol::SpecialBit(p) | Protocol::Layered(p) => p.message_sizes(),
            Protocol::ManyMessage(p) => vec![p.message_count()],
            Protocol::FalseAlarm(p) => vec![p.message_count()],
        }
    }

    /// Number of messages in the leading class (specials); zero for layered codes.
    pub fn special_count(&self) -> usize {
        match self {
            Protocol::SpecialBit(_) | Protocol::Layered(_) => 0,
            Protocol::ManyMessage(p) => p.specials(),
            Protocol::FalseAlarm(_) => 1,
        }
    }

    /// Channel uses per attempt.
    pub fn attempt_len(&self) -> u64 {
        match self {
            Protocol::SpecialBit(p) | Protocol::Layered(p) => p.attempt_len(),
            Protocol::ManyMessage(p) => p.attempt_len(),
            Protocol::FalseAlarm(p) => p.attempt_len(),
        }
    }

    pub fn constants(&self) -> &ChannelConstants {
        match self {
            Protocol::SpecialBit(p) | Protocol::Layered(p) => p.constants(),
            Protocol::ManyMessage(p) => p.constants(),
            Protocol::FalseAlarm(p) => p.constants(),
        }
    }

    pub fn run<C: ChannelSource>(&self, truth: &[usize], ch: &mut C) -> Result<Transcript> {
        match self {
            Protocol::SpecialBit(p) | Protocol::Layered(p) => p.run(truth, ch),
            _ if truth.len() != 1 => Err(FeedbackError::BadTruth {
                truth: truth.to_vec(),
                sizes: self.message_sizes(),
            }),
            Protocol::ManyMessage(p) => p.run(truth[0], ch),
            Protocol::FalseAlarm(p) => p.run(truth[0], ch),
        }
    }
}
