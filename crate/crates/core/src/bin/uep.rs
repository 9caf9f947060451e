//! Command-line front end: channel validation, exponent tables, curves, exact
//! type-class analysis and seeded simulation.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 invalid channel or
//! infeasible request, 3 unparsable channel file or arguments.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use uep::exact::{self, ExactError};
use uep::exponents::{self, CurveKind, DEFAULT_CAPACITY_TOL};
use uep::feedback::{ProtocolKind, ProtocolParams, DEFAULT_RHO};
use uep::simulation::{self, ExperimentSpec, ProtocolExperiment, TruthDistribution};
use uep::{load_channel, ChannelFileError, Dmc};

#[derive(Parser, Debug, Serialize)]
#[command(name = "uep", version, about = "Unequal-error-protection exponents and simulations")]
struct Cli {
    /// Worker threads for parallel sections; results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Show rates and exponents in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Emit JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Check that a channel file parses and is a strictly positive DMC.
    Validate(ChannelArg),
    /// Capacity, red-alert, D_max and false-alarm exponents.
    Exponents(ChannelArg),
    /// Sample an exponent curve as CSV.
    Curve(CurveArgs),
    /// Exact type-class probability of a repetition-code event.
    Exact(ExactArgs),
    /// Seeded Monte-Carlo run of a protocol or block code.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Serialize)]
struct ChannelArg {
    #[arg(long)]
    channel: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct CurveArgs {
    #[arg(long)]
    channel: PathBuf,
    /// sphere_packing, f_of_r, bit_layers, many_message_feedback, erasure_md or burnashev_line.
    #[arg(long)]
    kind: CurveKind,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Layer rates in nats for bit_layers.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum ExactScheme {
    /// Output of `x_r^n` inside the ball around `P_Y*`.
    MissedDetection,
    /// Output of an ordinary `P_X*` codeword inside the ball around `W(.|x_fl)`.
    FalseAlarm,
}

#[derive(Args, Debug, Serialize)]
struct ExactArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, value_enum, default_value = "missed_detection")]
    scheme: ExactScheme,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    delta: f64,
    /// Extra block lengths; with at least 3 values the exponent is fitted over them.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum SimKind {
    SpecialBit,
    Layered,
    ManyMessage,
    FalseAlarm,
    SpecialMessageCode,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, value_enum)]
    protocol: SimKind,
    /// Master seed; required so that every run is reproducible.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Base length of feedback protocols.
    #[arg(long, default_value_t = 256)]
    k: usize,
    /// Layer rates, or the communication rate of many_message, in nats.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    rho: f64,
    #[arg(long, default_value_t = 16)]
    special_count: usize,
    #[arg(long)]
    phase1_len: Option<usize>,
    /// Fixed typicality radius; length^(-1/4) of each checked block when absent.
    #[arg(long)]
    delta: Option<f64>,
    /// Block length of special_message_code.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Ordinary messages of special_message_code.
    #[arg(long, default_value_t = 16)]
    num_ordinary: usize,
    /// Codebook seed; the master seed when absent.
    #[arg(long)]
    code_seed: Option<u64>,
    #[arg(long, default_value = "uniform")]
    truth: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-trial transcripts as JSON lines (feedback protocols only).
    #[arg(long)]
    transcripts: Option<PathBuf>,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<ChannelFileError> for Failure {
    fn from(e: ChannelFileError) -> Self {
        let code = match e {
            ChannelFileError::Io { .. } => 1,
            ChannelFileError::Parse { .. } => 3,
            ChannelFileError::Invalid { .. } => 2,
        };
        Failure::new(code, e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(1, e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new(1, e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(config) = serde_json::to_string(&cli) {
        eprintln!("config: {config}");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n.max(1));
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(&cli)),
        Err(e) => Err(Failure::new(1, e)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let unit = Unit::new(cli.bits);
    match &cli.command {
        Command::Validate(a) => validate(&a.channel, cli.json),
        Command::Exponents(a) => exponents_cmd(&load(&a.channel)?, unit, cli.json),
        Command::Curve(a) => curve_cmd(a, unit),
        Command::Exact(a) => exact_cmd(a, unit, cli.json),
        Command::Simulate(a) => simulate_cmd(a),
    }
}

fn load(path: &Path) -> Result<Dmc, Failure> {
    Ok(load_channel(path)?)
}

/// Presentation unit; values are computed in nats.
#[derive(Clone, Copy)]
struct Unit {
    scale: f64,
    name: &'static str,
}

impl Unit {
    fn new(bits: bool) -> Self {
        if bits {
            Unit {
                scale: 1.0 / std::f64::consts::LN_2,
                name: "bits",
            }
        } else {
            Unit {
                scale: 1.0,
                name: "nats",
            }
        }
    }

    fn show(self, v: f64) -> f64 {
        v * self.scale
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn validate(path: &Path, json: bool) -> Outcome {
    let w = load(path)?;
    let symmetric = w.is_symmetric().ok();
    if json {
        let v = serde_json::json!({
            "valid": true,
            "inputs": w.inputs(),
            "outputs": w.outputs(),
            "min_entry": w.min_entry(),
            "symmetric": symmetric,
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        let sym = match symmetric {
            Some(true) => "yes",
            Some(false) => "no",
            None => "undecided",
        };
        println!("valid {}x{} channel, min entry {:e}, symmetric: {sym}", w.inputs(), w.outputs(), w.min_entry());
    }
    Ok(())
}

#[derive(Serialize)]
struct ExponentTable {
    unit: &'static str,
    capacity: f64,
    capacity_gap: f64,
    input_distribution: Vec<f64>,
    output_distribution: Vec<f64>,
    red_alert: f64,
    x_r: usize,
    d_max: f64,
    x_a: usize,
    x_d: usize,
    false_alarm_lower: f64,
    x_fl: usize,
    false_alarm_upper: f64,
    x_fu: usize,
}

fn exponents_cmd(w: &Dmc, unit: Unit, json: bool) -> Outcome {
    let r = exponents::exponent_report(w, DEFAULT_CAPACITY_TOL).map_err(|e| Failure::new(2, e))?;
    let t = ExponentTable {
        unit: unit.name,
        capacity: unit.show(r.capacity.capacity),
        capacity_gap: unit.show(r.capacity.gap),
        input_distribution: r.capacity.input_dist.weights().to_vec(),
        output_distribution: r.capacity.output_dist.weights().to_vec(),
        red_alert: unit.show(r.red_alert.value),
        x_r: r.red_alert.letter,
        d_max: unit.show(r.d_max.value),
        x_a: r.d_max.x_a,
        x_d: r.d_max.x_d,
        false_alarm_lower: unit.show(r.false_alarm_lower.value),
        x_fl: r.false_alarm_lower.letter,
        false_alarm_upper: unit.show(r.false_alarm_upper.value),
        x_fu: r.false_alarm_upper.letter,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&t)?);
        return Ok(());
    }
    let dist = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.12}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let u = unit.name;
    let mut s = String::new();
    s += &format!("{:<20} {:.12} {u} (gap {:.3e})\n", "capacity", t.capacity, t.capacity_gap);
    s += &format!("{:<20} {}\n", "P_X*", dist(&t.input_distribution));
    s += &format!("{:<20} {}\n", "P_Y*", dist(&t.output_distribution));
    s += &format!("{:<20} {:.12} {u} (x_r = {})\n", "red_alert", t.red_alert, t.x_r);
    s += &format!("{:<20} {:.12} {u} (x_a = {}, x_d = {})\n", "d_max", t.d_max, t.x_a, t.x_d);
    s += &format!("{:<20} {:.12} {u} (x_fl = {})\n", "false_alarm_lower", t.false_alarm_lower, t.x_fl);
    s += &format!("{:<20} {:.12} {u} (x_fu = {})\n", "false_alarm_upper", t.false_alarm_upper, t.x_fu);
    print!("{s}");
    Ok(())
}

fn curve_cmd(a: &CurveArgs, unit: Unit) -> Outcome {
    let w = load(&a.channel)?;
    let c = exponents::curve(&w, a.kind, a.grid, a.rates.as_deref()).map_err(|e| Failure::new(2, e))?;
    let mut text = format!("rate_{u},value_{u}\n", u = unit.name);
    for (r, v) in c.points() {
        text += &format!("{:.14e},{:.14e}\n", unit.show(r), unit.show(v));
    }
    write_output(a.out.as_deref(), &text)
}

#[derive(Serialize)]
struct ExactReport {
    scheme: ExactScheme,
    n: u64,
    delta: f64,
    unit: &'static str,
    probability: f64,
    ln_probability: f64,
    exponent: f64,
    types: u64,
    ladder: Option<LadderFit>,
}

#[derive(Serialize)]
struct LadderFit {
    ns: Vec<u64>,
    exponents: Vec<f64>,
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn exact_failure(e: ExactError) -> Failure {
    let code = match e {
        ExactError::TypeBudget { .. } | ExactError::Exponent(_) => 1,
        _ => 2,
    };
    Failure::new(code, e)
}

fn exact_point(w: &Dmc, scheme: ExactScheme, n: u64, delta: f64) -> Result<exact::RegionProbability, Failure> {
    match scheme {
        ExactScheme::MissedDetection => exact::exact_missed_detection(w, n, delta),
        ExactScheme::FalseAlarm => exponents::capacity(w, exponents::REFERENCE_TOL)
            .map_err(ExactError::from)
            .and_then(|cap| exact::exact_false_alarm(w, n, delta, &cap.output_dist)),
    }
    .map_err(exact_failure)
}

fn exact_cmd(a: &ExactArgs, unit: Unit, json: bool) -> Outcome {
    let w = load(&a.channel)?;
    let p = exact_point(&w, a.scheme, a.n, a.delta)?;
    let ladder = match &a.ladder {
        Some(ns) => {
            let points: Vec<exact::RegionProbability> = ns
                .iter()
                .map(|&n| exact_point(&w, a.scheme, n, a.delta))
                .collect::<Result<_, _>>()?;
            let ln: Vec<f64> = points.iter().map(|p| p.ln_probability).collect();
            let fit = exact::fit_log_exponent(ns, &ln).map_err(exact_failure)?;
            Some(LadderFit {
                ns: ns.clone(),
                exponents: points
                    .iter()
                    .zip(ns)
                    .map(|(p, &n)| unit.show(p.exponent(n)))
                    .collect(),
                slope: unit.show(fit.slope),
                intercept: unit.show(fit.intercept),
                r2: fit.r2,
            })
        }
        None => None,
    };
    let r = ExactReport {
        scheme: a.scheme,
        n: a.n,
        delta: a.delta,
        unit: unit.name,
        probability: p.probability,
        ln_probability: p.ln_probability,
        exponent: unit.show(p.exponent(a.n)),
        types: p.types,
        ladder,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
        return Ok(());
    }
    println!("{:<16} {:.12e}", "probability", r.probability);
    println!("{:<16} {:.12}", "ln_probability", r.ln_probability);
    println!("{:<16} {:.12} {}", "exponent", r.exponent, r.unit);
    println!("{:<16} {}", "types", r.types);
    if let Some(l) = &r.ladder {
        for (n, e) in l.ns.iter().zip(&l.exponents) {
            println!("{:<16} {:.12} {}", format!("exponent@{n}"), e, r.unit);
        }
        println!("{:<16} {:.12} {} (r2 {:.6})", "fitted_slope", l.slope, r.unit, l.r2);
    }
    Ok(())
}

fn simulate_cmd(a: &SimulateArgs) -> Outcome {
    let w = load(&a.channel)?;
    let truth: TruthDistribution = a.truth.parse().map_err(|e: String| Failure::new(3, e))?;
    let params = ProtocolParams {
        k: a.k,
        rates: a.rates.clone().unwrap_or_default(),
        special_count: a.special_count,
        phase1_len: a.phase1_len,
        typicality_radius: a.delta,
        rho: a.rho,
        seed: a.code_seed.unwrap_or(a.seed),
    };
    let protocol = match a.protocol {
        SimKind::SpecialBit => Some(ProtocolKind::SpecialBit),
        SimKind::Layered => Some(ProtocolKind::Layered),
        SimKind::ManyMessage => Some(ProtocolKind::ManyMessage),
        SimKind::FalseAlarm => Some(ProtocolKind::FalseAlarm),
        SimKind::SpecialMessageCode => None,
    };
    let spec = match protocol {
        Some(protocol) => ExperimentSpec::Protocol {
            protocol,
            params: params.clone(),
            truth,
        },
        None => ExperimentSpec::SpecialMessageCode {
            n: a.n,
            num_ordinary: a.num_ordinary,
            delta: a.delta,
            code_seed: a.code_seed.unwrap_or(a.seed),
            truth,
        },
    };
    eprintln!("experiment: {}", serde_json::to_string(&spec)?);
    let infeasible = |e: simulation::SimError| Failure::new(2, e);
    let report = simulation::run_spec(&w, &spec, a.trials, a.seed).map_err(infeasible)?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_output(a.out.as_deref(), &text)?;
    if let Some(path) = &a.transcripts {
        let Some(kind) = protocol else {
            return Err(Failure::new(2, "transcripts are only recorded for feedback protocols"));
        };
        let p = uep::feedback::Protocol::build(kind, &w, &params).map_err(|e| Failure::new(2, e))?;
        let exp = ProtocolExperiment::new(p, &w, truth).map_err(infeasible)?;
        let mut file = io::BufWriter::new(fs::File::create(path)?);
        simulation::write_transcripts(&exp, a.trials, a.seed, &mut file).map_err(|e| Failure::new(1, e))?;
        file.flush()?;
    }
    Ok(())
}
