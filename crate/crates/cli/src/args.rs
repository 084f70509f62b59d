use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "dthazard", version, about = "Hazard rate estimation for doubly truncated lifetimes")]
pub struct Cli {
    /// Worker threads for bootstrap and simulation loops.
    #[arg(long, global = true, env = "DT_HAZARD_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check existence and uniqueness of the NPMLE.
    Check(CheckArgs),
    /// Fit the lifetime distribution and print a JSON summary.
    Fit(FitArgs),
    /// Estimate the hazard rate on a grid.
    Hazard(HazardArgs),
    /// Estimate the biasing function G.
    Gfun(GfunArgs),
    /// Least-squares cross-validation trace and selected bandwidth.
    Bandwidth(BandwidthArgs),
    /// Hazard estimate with bootstrap bands (500 replicates unless --bands is given).
    Bands(HazardArgs),
    /// Monte Carlo study on one of the built-in models.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InputArgs {
    /// CSV with header `u,x,v`.
    pub input: PathBuf,
    /// Apply `t -> (t + a) / b` to u, x and v, given as `a,b`.
    #[arg(long, value_parser = parse_pair)]
    pub transform: Option<(f64, f64)>,
    /// Interval-sampling width, overriding the one detected from the data.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Window widths uniform on `lo,hi` (random-width design).
    #[arg(long, value_parser = parse_pair, conflicts_with = "tau")]
    pub width_range: Option<(f64, f64)>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelArgs {
    /// Estimator: np, sp or naive.
    #[arg(long, default_value = "np")]
    pub kind: String,
    /// Truncation family for sp: beta, beta1 or uniform.
    #[arg(long, default_value = "beta")]
    pub family: String,
    /// Fixed uniform support, as `a=<lo>,b=<hi>` (uniform family only).
    #[arg(long, value_parser = parse_fix)]
    pub fix: Option<(f64, f64)>,
    /// Jittered restarts of the simplex search.
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    /// Evaluation grid `lo:hi:count`; defaults to the lifetime range.
    #[arg(long, value_parser = parse_spec)]
    pub grid: Option<(f64, f64, usize)>,
    /// Points of the default grid.
    #[arg(long, default_value_t = 256)]
    pub grid_points: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SmoothingArgs {
    /// epanechnikov or gaussian.
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// Bandwidth, or `auto` for cross-validation.
    #[arg(long, default_value = "auto")]
    pub h: String,
    /// Geometric bandwidth grid `lo:hi:count` searched when `--h auto`.
    #[arg(long, value_parser = parse_spec)]
    pub h_grid: Option<(f64, f64, usize)>,
    /// Cross-validation integration range `lo,hi`.
    #[arg(long, value_parser = parse_pair)]
    pub range: Option<(f64, f64)>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BootArgs {
    /// Bootstrap replicates for pointwise bands.
    #[arg(long)]
    pub bands: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Pilot bandwidth of the smoothed bootstrap; normal reference when absent.
    #[arg(long)]
    pub pilot_h0: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutputArgs {
    /// Output CSV; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// JSON summary; `<output>.json` when an output file is given, else stderr.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Write the largest strongly connected subsample to this CSV.
    #[arg(long)]
    pub extract_largest: Option<PathBuf>,
    /// JSON report; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// JSON summary; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also write the fitted distribution function as `x,value`.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct HazardArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct GfunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub boot: BootArgs,
    /// Kernel of the smoothed bootstrap.
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BandwidthArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub smoothing: SmoothingArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// m1, m2, m31, m32, m33 or misspec.
    #[arg(long)]
    pub model: String,
    /// Beta(1, a) truncation parameters for misspec, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub a: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// Geometric bandwidth grid `lo:hi:count`.
    #[arg(long, value_parser = parse_spec, default_value = "0.02:0.5:20")]
    pub h_grid: (f64, f64, usize),
    /// Estimators, comma separated: np, sp, naive, oracle.
    #[arg(long, value_delimiter = ',', default_value = "np,sp,naive,oracle")]
    pub kinds: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,
    /// Points of the ISE integration grid.
    #[arg(long, default_value_t = 512)]
    pub ise_points: usize,
    /// Also compute bias and variance at the quartiles, each kind at its optimal bandwidth.
    #[arg(long)]
    pub quartiles: bool,
    /// Directory for the result tables.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((num(a)?, num(b)?)),
        _ => Err(format!("expected two numbers `a,b`, got `{s}`")),
    }
}

pub fn parse_spec(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi, k] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let k: usize = k.parse().map_err(|_| format!("bad count `{k}`"))?;
            if !(lo < hi) || k < 2 {
                return Err(format!("need lo < hi and count >= 2 in `{s}`"));
            }
            Ok((lo, hi, k))
        }
        _ => Err(format!("expected `lo:hi:count`, got `{s}`")),
    }
}

pub fn parse_fix(s: &str) -> Result<(f64, f64), String> {
    let (mut a, mut b) = (None, None);
    for part in s.split(',') {
        match part.trim().split_once('=') {
            Some(("a", v)) => a = Some(num(v)?),
            Some(("b", v)) => b = Some(num(v)?),
            _ => return Err(format!("expected `a=<lo>,b=<hi>`, got `{s}`")),
        }
    }
    match (a, b) {
        (Some(a), Some(b)) if a < b => Ok((a, b)),
        _ => Err(format!("need both a and b with a < b in `{s}`")),
    }
}

fn num(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("`{s}` is not a finite number"))
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
