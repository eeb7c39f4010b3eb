//! The `mismatch-qkd` command line.
//!
//! Exit codes: 0 success, 1 input error, 2 protocol abort, 3 verification
//! violation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::decoy::{decoy_keyrate, DecoyInputs, IntensityLabel, IntensityRecord};
use crate::error::{Error, Result};
use crate::keyrate::{
    deltas_from_single_obs, keyrate_multiphoton_with, keyrate_no_mismatch, keyrate_single_simple,
    keyrate_single_tight, EngineOptions, KeyRateResult, Observables, T1Sign,
};
use crate::oracles::{run_suite, TrialReport, SUITES};
use crate::scalarmath::{p01_min, MismatchEta, Probability};
use crate::simulate::{eta_grid, sweep_figure, SweepRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ABORT: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Environment variable holding the default seed of `verify`.
pub const SEED_ENV: &str = "MISMATCH_QKD_SEED";

#[derive(Debug, Parser)]
#[command(name = "mismatch-qkd", version, about = "BB84 key-rate bounds under detection-efficiency mismatch")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Key-rate bound from observed rates.
    Keyrate(KeyrateArgs),
    /// Key rates of the depolarizing line over a grid of efficiencies, as CSV.
    Sweep(SweepArgs),
    /// Decoy-state estimates and key rate from a config file.
    Decoy(DecoyArgs),
    /// Minimal mean double-click probability for n photons.
    P01min(P01minArgs),
    /// Randomized verification suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Multiphoton,
    Tight,
    Simple,
    Nomismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

#[derive(Debug, Args)]
struct KeyrateArgs {
    /// Efficiency of detector 1 relative to detector 0, in (0, 1].
    #[arg(long)]
    eta: f64,
    #[arg(long = "p-det")]
    p_det: f64,
    #[arg(long)]
    p1: f64,
    /// Weighted x-basis error rate.
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    p01: f64,
    /// z-basis error ratio.
    #[arg(long)]
    qz: f64,
    #[arg(long, value_enum, default_value = "multiphoton")]
    mode: Mode,
    #[arg(long = "t1-sign", value_enum, default_value = "plus")]
    t1_sign: SignArg,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    qber: f64,
    #[arg(long, default_value_t = 1e-5)]
    p01: f64,
    #[arg(long = "eta-min", default_value_t = 0.5)]
    eta_min: f64,
    #[arg(long = "eta-max", default_value_t = 1.0)]
    eta_max: f64,
    #[arg(long, default_value_t = 51)]
    steps: usize,
    /// Line transmittance multiplying every rate.
    #[arg(long, default_value_t = 1.0)]
    transmittance: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecoyArgs {
    config: PathBuf,
}

#[derive(Debug, Args)]
struct P01minArgs {
    #[arg(long)]
    n: u32,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 7)]
    seed: u64,
    /// Also write the reports as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_INPUT
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::Keyrate(a) => cmd_keyrate(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Decoy(a) => cmd_decoy(&a.config, out),
        Command::P01min(a) => cmd_p01min(a.n, out),
        Command::Verify(a) => cmd_verify(&a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Invalid(format!("i/o: {e}"))
}

fn report_result(r: &KeyRateResult, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "k = {}", format_sig(r.k_bound)).map_err(io_err)?;
    writeln!(out, "argmin_pdet2 = {}", format_sig(r.argmin_pdet2)).map_err(io_err)?;
    writeln!(out, "pdet2_upper = {}", format_sig(r.pdet2_upper)).map_err(io_err)?;
    writeln!(out, "status = {}", r.status).map_err(io_err)?;
    Ok(if r.status.is_feasible() { EXIT_OK } else { EXIT_ABORT })
}

fn cmd_keyrate(a: &KeyrateArgs, out: &mut dyn Write) -> Result<i32> {
    let eta = MismatchEta::new(a.eta)?;
    let obs = Observables::new(eta, a.p_det, a.p1, a.q, a.p01, a.qz)?;
    let single = |obs: &Observables| {
        let t1 = obs.p_det() + (1.0 / a.eta - 1.0) * obs.p_1();
        deltas_from_single_obs(obs.p_det(), obs.p_1(), t1, obs.q(), eta)
    };
    let p_det = Probability::new(a.p_det)?;
    let k = match a.mode {
        Mode::Multiphoton => {
            let opts = EngineOptions {
                t1_sign: match a.t1_sign {
                    SignArg::Plus => T1Sign::Plus,
                    SignArg::Minus => T1Sign::Minus,
                },
            };
            return report_result(&keyrate_multiphoton_with(&obs, opts), out);
        }
        Mode::Tight => keyrate_single_tight(p_det, single(&obs)?),
        Mode::Simple => keyrate_single_simple(p_det, single(&obs)?.delta_x())?,
        Mode::Nomismatch => keyrate_no_mismatch(p_det, Probability::new(a.qz)?),
    };
    writeln!(out, "k = {}", format_sig(k)).map_err(io_err)?;
    writeln!(out, "status = feasible").map_err(io_err)?;
    Ok(EXIT_OK)
}

pub const SWEEP_HEADER: &str = "eta,k_main,k_tight,k_simple,k_nomismatch,ratio,status";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    let opt = |v: Option<f64>| v.map(format_sig).unwrap_or_default();
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_sig(r.eta),
            opt(r.k_main),
            format_sig(r.k_tight),
            format_sig(r.k_simple),
            format_sig(r.k_nomismatch),
            opt(r.ratio),
            r.status
        ));
    }
    s
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let qber = Probability::new(a.qber)?;
    let p01 = Probability::new(a.p01)?;
    let grid = eta_grid(a.eta_min, a.eta_max, a.steps)?;
    let rows = sweep_figure(qber, p01, &grid)?
        .into_iter()
        .map(|r| r.scaled(a.transmittance))
        .collect::<Result<Vec<_>>>()?;
    let csv = sweep_csv(&rows);
    match &a.out {
        Some(path) => fs::write(path, csv)
            .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))?,
        None => out.write_all(csv.as_bytes()).map_err(io_err)?,
    }
    Ok(EXIT_OK)
}

/// Parsed `key = value` configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, f64>,
}

const RECORD_FIELDS: [&str; 6] = ["mu", "p_det", "p_1", "p_01", "q0", "q1"];
const PREFIXES: [&str; 3] = ["signal", "decoy1", "decoy2"];

fn known_decoy_key(key: &str) -> bool {
    if key == "eta" || key == "qz" {
        return true;
    }
    key.split_once('.')
        .is_some_and(|(p, f)| PREFIXES.contains(&p) && RECORD_FIELDS.contains(&f))
}

impl RunConfig {
    /// Parses the text; blank lines and `#` comments are ignored, unknown or
    /// repeated keys are errors.
    pub fn parse(text: &str, known: impl Fn(&str) -> bool) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("line {}: expected 'key = value'", i + 1)))?;
            let key = k.trim();
            if !known(key) {
                return Err(Error::Invalid(format!("line {}: unknown key '{key}'", i + 1)));
            }
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("line {}: '{}' is not a number", i + 1, v.trim())))?;
            if values.insert(key.to_string(), value).is_some() {
                return Err(Error::Invalid(format!("line {}: duplicate key '{key}'", i + 1)));
            }
        }
        Ok(RunConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| Error::Invalid(format!("missing required key '{key}'")))
    }

    /// Decoy inputs and `qz`. Decoy double-click rates default to zero.
    pub fn decoy_inputs(&self) -> Result<(DecoyInputs, Probability)> {
        let record = |prefix: &str, label| -> Result<IntensityRecord> {
            let field = |f: &str| {
                let key = format!("{prefix}.{f}");
                match (f, prefix) {
                    ("p_01", "decoy1" | "decoy2") => Ok(self.get(&key).unwrap_or(0.0)),
                    _ => self.require(&key),
                }
            };
            IntensityRecord::new(
                label,
                field("mu")?,
                field("p_det")?,
                field("p_1")?,
                field("p_01")?,
                field("q0")?,
                field("q1")?,
            )
        };
        let inputs = DecoyInputs::new(
            record("signal", IntensityLabel::Signal)?,
            record("decoy1", IntensityLabel::Decoy1)?,
            record("decoy2", IntensityLabel::Decoy2)?,
            MismatchEta::new(self.require("eta")?)?,
        )?;
        Ok((inputs, Probability::new(self.require("qz")?)?))
    }
}

pub fn load_decoy_config(path: &Path) -> Result<(DecoyInputs, Probability)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text, known_decoy_key)?.decoy_inputs()
}

fn cmd_decoy(path: &Path, out: &mut dyn Write) -> Result<i32> {
    let (inputs, qz) = load_decoy_config(path)?;
    let o = decoy_keyrate(&inputs, qz)?;
    writeln!(out, "y0_lower = {}", format_sig(o.y0_lower)).map_err(io_err)?;
    writeln!(out, "pdet1_lower = {}", format_sig(o.pdet_lower)).map_err(io_err)?;
    writeln!(out, "p1_1_lower = {}", format_sig(o.p1_lower)).map_err(io_err)?;
    writeln!(out, "q1_upper = {}", format_sig(o.q_upper)).map_err(io_err)?;
    report_result(&o.result, out)
}

fn cmd_p01min(n: u32, out: &mut dyn Write) -> Result<i32> {
    writeln!(out, "{:.12}", p01_min(n)?).map_err(io_err)?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    if !SUITES.contains(&a.suite.as_str()) {
        return Err(Error::Invalid(format!(
            "unknown suite '{}' (expected one of {})",
            a.suite,
            SUITES.join(", ")
        )));
    }
    let reports = run_suite(&a.suite, a.trials, a.seed)?;
    for r in &reports {
        writeln!(out, "{r}").map_err(io_err)?;
    }
    if let Some(path) = &a.csv {
        let mut csv = String::from(TrialReport::CSV_HEADER);
        csv.push('\n');
        for r in &reports {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        fs::write(path, csv).map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(if reports.iter().all(TrialReport::passed) {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

/// `%.10g`: ten significant digits, trailing zeros removed, exponent form
/// below `1e-4` or from `1e10` on.
pub fn format_sig(x: f64) -> String {
    const DIGITS: i32 = 10;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
