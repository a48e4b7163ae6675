use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ifs_core::MapKind;

#[derive(Debug, Parser)]
#[command(name = "ifs", version, about = "Distribution and density estimation with iterated function systems")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Seed for every randomized step [default: 3735928559]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Known support of the data, as `alpha,beta`
    #[arg(long, global = true, value_parser = parse_support, allow_hyphen_values = true)]
    pub support: Option<(f64, f64)>,

    /// Number of intervals of the CDF grid
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Highest moment order used in the fit
    #[arg(long, global = true)]
    pub moments: Option<usize>,

    /// Applications of the IFS operator starting from the uniform CDF
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a single-column CSV of observations
    Fit(FitArgs),
    /// Evaluate a fitted model
    Eval(EvalArgs),
    /// Relative efficiency of the IFS estimators against the EDF on Beta samples
    Benchmark(BenchmarkArgs),
    /// Fit to Beta(2,2) data observed only through three windows
    MissingDemo(MissingDemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    W1,
    W2,
    Q1,
    Q2,
}

impl From<Family> for MapKind {
    fn from(f: Family) -> Self {
        match f {
            Family::W1 => MapKind::W1,
            Family::W2 => MapKind::W2,
            Family::Q1 => MapKind::Q1,
            Family::Q2 => MapKind::Q2,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,

    #[arg(long, value_enum)]
    pub family: Family,

    /// Resolution of the wavelet families (w1 default 5, w2 default 8)
    #[arg(long, conflicts_with = "quantiles")]
    pub i_star: Option<u32>,

    /// Number of quantile maps (default n/2)
    #[arg(long)]
    pub quantiles: Option<usize>,

    /// Where to write the model; standard output if absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub model: PathBuf,

    /// Points at which to print the estimate
    #[arg(long = "at", allow_hyphen_values = true)]
    pub at: Vec<f64>,

    /// Write the curve on the grid to this CSV
    #[arg(long)]
    pub grid_out: Option<PathBuf>,

    /// Also evaluate the Fourier density estimate
    #[arg(long)]
    pub density: bool,

    /// Sample size for the density term rule when the model does not record one
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// TOML benchmark description; missing keys take the full-table defaults
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MissingDemoArgs {
    /// Sample size before censoring
    #[arg(long, default_value_t = 400)]
    pub n: usize,

    #[arg(long, default_value = "missing-demo")]
    pub out_dir: PathBuf,
}

fn parse_support(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `alpha,beta`, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let (a, b) = (parse(a)?, parse(b)?);
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(format!("support must satisfy alpha < beta, got {a},{b}"));
    }
    Ok((a, b))
}
