//! `redkit`: reduce, inspect and verify ReLU networks stored as ONNX.

mod commands;
mod error;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use redkit::bound_engine::{AlphaRule, BoundMethod};
use redkit::reducer::{MergePolicy, ShiftMethod};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "redkit", version, about = "Stable-ReLU network reduction toolkit")]
#[command(after_help = "Exit codes: 0 success or verified, 1 unknown or inequivalent, 2 usage or input error, \
3 unsupported model, 4 internal error.\nREDKIT_THREADS caps the worker threads; RUST_LOG sets log verbosity.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Remove stable neurons and write reduced.onnx and report.csv.
    Reduce(ReduceArgs),
    /// Rewrite a residual/DAG model into an equivalent Linear/ReLU chain.
    Simplify(SimplifyArgs),
    /// Generate a random network with planted stable neurons.
    Gen(GenArgs),
    /// Print layer widths and operator statistics of a model.
    Stats(StatsArgs),
    /// Print per-neuron pre-activation bounds as CSV.
    Bounds(BoundsArgs),
    /// Compare two models on a box.
    Equiv(EquivArgs),
    /// Check an output property.
    Verify(VerifyArgs),
    /// Time verification on a model and its reduction.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Interval,
    Crown,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlphaArg {
    Adaptive,
    Zero,
    One,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MergeArg {
    Auto,
    Always,
    Never,
}

#[derive(Args, Debug, Clone)]
pub struct BoundArgs {
    #[arg(long, value_enum, default_value = "crown")]
    method: MethodArg,
    /// Lower-slope rule for unstable neurons under CROWN.
    #[arg(long, value_enum, default_value = "adaptive")]
    alpha: AlphaArg,
}

impl BoundArgs {
    pub fn method(&self) -> BoundMethod {
        match self.method {
            MethodArg::Interval => BoundMethod::Interval,
            MethodArg::Crown => BoundMethod::Crown(self.alpha()),
        }
    }

    pub fn alpha(&self) -> AlphaRule {
        match self.alpha {
            AlphaArg::Adaptive => AlphaRule::Adaptive,
            AlphaArg::Zero => AlphaRule::Zero,
            AlphaArg::One => AlphaRule::One,
        }
    }
}

/// Input region: a VNNLIB file, or a centre file with a radius.
///
/// Centre files hold one value per line or comma-separated values; blank
/// lines and `#` comments are ignored.
#[derive(Args, Debug, Clone, Default)]
pub struct PropertyArgs {
    #[arg(long, conflicts_with_all = ["center", "eps", "clip"])]
    vnnlib: Option<PathBuf>,
    #[arg(long, requires = "eps")]
    center: Option<PathBuf>,
    #[arg(long, requires = "center")]
    eps: Option<f64>,
    /// Clip the ε-ball to `LO,HI`, e.g. `0,1` for images.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    clip: Option<(f64, f64)>,
    /// Class to prove robust around the centre; defaults to the model's
    /// prediction at the centre.
    #[arg(long, conflicts_with = "vnnlib")]
    label: Option<usize>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    property: PropertyArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    /// How the merged-neuron shift is bounded.
    #[arg(long, value_enum, default_value = "interval")]
    shift: MethodArg,
    #[arg(long, value_enum, default_value = "auto")]
    merge: MergeArg,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl ReduceArgs {
    pub fn shift(&self) -> ShiftMethod {
        match self.shift {
            MethodArg::Interval => ShiftMethod::Interval,
            MethodArg::Crown => ShiftMethod::Crown(self.bounds.alpha()),
        }
    }

    pub fn merge(&self) -> MergePolicy {
        match self.merge {
            MergeArg::Auto => MergePolicy::Auto,
            MergeArg::Always => MergePolicy::Always,
            MergeArg::Never => MergePolicy::Never,
        }
    }
}

#[derive(Args, Debug)]
pub struct SimplifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Needed when the model routes its input or a Linear output around a
    /// ReLU.
    #[command(flatten)]
    property: PropertyArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Number of hidden ReLU layers.
    #[arg(long, default_value_t = 4)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    input_dim: usize,
    #[arg(long, default_value_t = 10)]
    outputs: usize,
    #[arg(long, default_value_t = 0.5)]
    stable_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    /// Radius of the input box.
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model path; the sidecar, centre and property are written next to it
    /// as `.json`, `.center.csv` and `.vnnlib`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    property: PropertyArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EquivArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    other: PathBuf,
    #[command(flatten)]
    property: PropertyArgs,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Check a full grid with this many points per dimension instead.
    #[arg(long, conflicts_with = "samples")]
    grid: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    /// Split unstable neurons until the property is decided.
    #[arg(long)]
    bab: bool,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value_t = 1000)]
    max_splits: usize,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    property: PropertyArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Reduced model; computed on the fly when omitted.
    #[arg(long)]
    reduced: Option<PathBuf>,
    #[command(flatten)]
    property: PropertyArgs,
    #[command(flatten)]
    bounds: BoundArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("REDKIT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("REDKIT_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Reduce(a) => commands::reduce(&a),
        Command::Simplify(a) => commands::simplify(&a),
        Command::Gen(a) => commands::gen(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Equiv(a) => commands::equiv(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Bench(a) => commands::bench(&a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
