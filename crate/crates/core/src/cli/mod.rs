//! Command-line front end: `generate | analyze | verify | berry`.
//!
//! Every report echoes its configuration, seeds, tool version and input
//! checksums, and contains no timings, so identical invocations produce
//! byte-identical output.

mod commands;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{write_json_pretty, Boundary};

pub use verify::{run_suite, CheckResult, SuiteConfig, SuiteReport};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "wuyang", version, about = "su(N) gauge fields, Wu-Yang potentials, skyrmion charges and Berry connections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a skyrmion magnetization or a band-limited random unitary field.
    Generate(GenerateArgs),
    /// Charges, Wu-Yang potentials and curvature of a field file.
    Analyze(AnalyzeArgs),
    /// Run the identity-verification suite.
    Verify(VerifyArgs),
    /// Berry connections, the weighted-average relation and loop phases.
    Berry(BerryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerateKind {
    Skyrmion,
    Unitary,
    /// Closed latitude path of spin states, as a 1D periodic unitary field.
    Loop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    Ppm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Curl,
    Bases,
    FiniteDifference,
    SolidAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryArg {
    Clamped,
    Periodic,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Clamped => Boundary::Clamped,
            BoundaryArg::Periodic => Boundary::Periodic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileArg {
    Linear,
    Arctan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarityArg {
    CoreDown,
    CoreUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceArg {
    Analytic,
    Overlap,
    Gauge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultArg {
    /// Scale the second Cartan generator by 1.01.
    ScaleH2,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: GenerateKind,
    /// Output field file.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Grid size as NXxNY.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<[usize; 2]>,
    /// Side length of the square domain.
    #[arg(long)]
    pub extent: Option<f64>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub winding: i32,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub helicity: f64,
    #[arg(long, value_enum, default_value_t = PolarityArg::CoreDown)]
    pub polarity: PolarityArg,
    #[arg(long, value_enum, default_value_t = ProfileArg::Linear)]
    pub profile: ProfileArg,
    /// Skyrmion radius; defaults to 0.45 of the extent.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Number of levels of a random unitary field.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Highest Fourier mode of a random unitary field.
    #[arg(long, default_value_t = 1)]
    pub max_mode: usize,
    /// Standard deviation of each Fourier coefficient.
    #[arg(long, default_value_t = 0.3)]
    pub amplitude: f64,
    /// Polar angle of a loop path.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub theta: f64,
    /// Number of steps along a loop path.
    #[arg(long, default_value_t = 1024)]
    pub steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Input field file.
    pub input: PathBuf,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Charge method (finite_difference, solid_angle) and/or curvature
    /// method (curl, bases); may be repeated.
    #[arg(long, value_enum)]
    pub method: Vec<MethodArg>,
    /// Coupling for unitary inputs; textures use g = qe.
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    #[arg(long, default_value_t = 1.0)]
    pub qe: f64,
    /// Also evaluate Berry connections and their relations.
    #[arg(long)]
    pub berry: bool,
    /// Spectrum for the weighted average, comma separated, level order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub spectrum: Option<Vec<f64>>,
    /// Fail instead of masking sites next to discontinuous links.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BerryArgs {
    /// Input field file (magnetization or unitary).
    pub input: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    #[arg(long, default_value_t = 1.0)]
    pub qe: f64,
    /// Spectrum for the weighted average, comma separated, level order.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub spectrum: Option<Vec<f64>>,
    /// Spin connection source for magnetization inputs.
    #[arg(long, value_enum, default_value_t = SourceArg::Gauge)]
    pub source: SourceArg,
    /// Eigenvector level for loop phases on 1D periodic unitary inputs.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// First seed of the randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 2)]
    pub n_min: usize,
    #[arg(long, default_value_t = 5)]
    pub n_max: usize,
    /// Add a further grid doubling to every convergence measurement.
    #[arg(long)]
    pub convergence: bool,
    /// Deliberately corrupt the generator basis (test hook).
    #[arg(long, value_enum)]
    pub inject_fault: Option<FaultArg>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid must look like 128x128, got '{s}'"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad grid size '{t}': {e}"));
    Ok([p(a)?, p(b)?])
}

/// Input file provenance recorded in reports.
#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_input(path: &Path) -> Result<(String, InputRecord)> {
    let bytes = fs::read(path)?;
    let record = InputRecord {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    };
    let text = String::from_utf8(bytes).map_err(|e| Error::Schema(format!("input is not UTF-8: {e}")))?;
    Ok((text, record))
}

/// Report envelope shared by every subcommand.
#[derive(Debug, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: C,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputRecord>,
    pub result: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(command: &'static str, config: C, inputs: Vec<InputRecord>, result: R) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            config,
            inputs,
            result,
        }
    }
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<()> {
    let text = write_json_pretty(report)?;
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => commands::generate(a).map(|_| 0),
        Command::Analyze(a) => commands::analyze(a).map(|_| 0),
        Command::Berry(a) => commands::berry(a).map(|_| 0),
        Command::Verify(a) => verify::command(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
