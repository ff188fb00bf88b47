mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use multicut::numerics::{PrecisionConfig, DD_DIGITS};
use multicut::potential::PolynomialPotential;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Exit 1 for bad input, 2 when a numerical procedure fails.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(multicut::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "{s}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl From<multicut::Error> for CliError {
    fn from(e: multicut::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Debug, Parser)]
#[command(name = "multicut", version, about = "Multi-cut log-gas numerics")]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags common to every subcommand; they override values from `--config`.
#[derive(Debug, Args)]
pub struct Shared {
    /// Flat JSON file with any of the option names below (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Ascending coefficients, e.g. `0,0,0.5` for λ²/2.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub potential: Option<String>,
    /// Number of cuts.
    #[arg(long, global = true)]
    pub q: Option<usize>,
    /// Number of eigenvalues.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// 1, 2 or 4.
    #[arg(long, global = true)]
    pub beta: Option<u32>,
    /// Scale η; the equilibrium is solved for ηV.
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Working precision in decimal digits.
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    /// Output directory (default: current).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Support, density and cut masses.
    Equilibrium,
    /// Rescaled kernel at a bulk point and its distance to the sine kernel.
    Kernel(KernelArgs),
    /// Partition functions by one of several methods.
    Partition(PartitionArgs),
    /// Metropolis sampling with estimator reports.
    Sample(SampleArgs),
    /// The acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct KernelArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<f64>,
    /// Points per axis of the (ξ, η) grid.
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Extra sizes for the decay fit, comma separated.
    #[arg(long)]
    pub ns: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct PartitionArgs {
    /// selberg | expansion | brute | dett | factorize
    #[arg(long)]
    pub method: Option<String>,
    /// Monte Carlo samples; brute force uses quadrature when absent.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Sizes for the factorization sweep, comma separated.
    #[arg(long)]
    pub ns: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct SampleArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub proposal_width: Option<f64>,
    /// Compare the first-marginal histogram with the exact density.
    #[arg(long)]
    pub marginal: bool,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Resolvent point as `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    /// Also write the recorded configurations as CSV.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Args, Default)]
pub struct VerifyArgs {
    /// fast | full
    #[arg(long)]
    pub tier: Option<String>,
    /// Criteria to run, comma separated; all when absent.
    #[arg(long)]
    pub only: Option<String>,
    /// Criteria whose tolerances are made unattainable.
    #[arg(long)]
    pub tamper: Option<String>,
}

/// Every option after merging the config file with the flags.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: Option<String>,
    pub q: Option<usize>,
    pub n: Option<usize>,
    pub beta: Option<u32>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub precision: Option<u32>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub point: Option<f64>,
    pub grid_points: Option<usize>,
    pub half_width: Option<f64>,
    pub ns: Option<String>,
    pub method: Option<String>,
    pub samples: Option<usize>,
    pub steps: Option<usize>,
    pub burn_in: Option<usize>,
    pub thinning: Option<usize>,
    pub chains: Option<usize>,
    pub proposal_width: Option<f64>,
    pub marginal: Option<bool>,
    pub bins: Option<usize>,
    pub z: Option<String>,
    pub dump: Option<bool>,
    pub tier: Option<String>,
    pub only: Option<String>,
    pub tamper: Option<String>,
}

macro_rules! overlay {
    ($cfg:ident, $src:expr, $($f:ident),*) => {
        { $( if $src.$f.is_some() { $cfg.$f = $src.$f.clone(); } )* }
    };
}

impl RunConfig {
    fn load(path: &PathBuf) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    fn merge(shared: &Shared, command: &Command) -> CliResult<Self> {
        let mut c = match &shared.config {
            Some(p) => Self::load(p)?,
            None => RunConfig::default(),
        };
        overlay!(c, shared, potential, q, n, beta, eta, seed, precision, out, threads);
        match command {
            Command::Equilibrium => {}
            Command::Kernel(a) => overlay!(c, a, point, grid_points, half_width, ns),
            Command::Partition(a) => overlay!(c, a, method, samples, ns),
            Command::Sample(a) => {
                overlay!(
                    c,
                    a,
                    steps,
                    burn_in,
                    thinning,
                    chains,
                    proposal_width,
                    bins,
                    z
                );
                if a.marginal {
                    c.marginal = Some(true);
                }
                if a.dump {
                    c.dump = Some(true);
                }
            }
            Command::Verify(a) => overlay!(c, a, tier, only, tamper),
        }
        Ok(c)
    }

    pub fn potential(&self) -> CliResult<PolynomialPotential> {
        match &self.potential {
            Some(s) => Ok(PolynomialPotential::parse(s)?),
            None => usage("missing --potential"),
        }
    }

    pub fn require<T: Copy>(&self, v: Option<T>, flag: &str) -> CliResult<T> {
        v.map_or_else(|| usage(format!("missing --{flag}")), Ok)
    }

    pub fn beta(&self, default: u32) -> CliResult<u32> {
        let b = self.beta.unwrap_or(default);
        if matches!(b, 1 | 2 | 4) {
            Ok(b)
        } else {
            usage(format!("--beta must be 1, 2 or 4, got {b}"))
        }
    }

    pub fn precision_config(&self) -> CliResult<PrecisionConfig> {
        let d = self.precision.unwrap_or(DD_DIGITS);
        let mut p = PrecisionConfig::default();
        p.working_digits = d;
        p.validate()?;
        Ok(p)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad {what} entry '{}'", t.trim())))
        })
        .collect()
}

pub fn run(args: Cli) -> CliResult<u8> {
    let cfg = RunConfig::merge(&args.shared, &args.command)?;
    if let Some(t) = cfg.threads {
        if t == 0 {
            return usage("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    cfg.precision_config()?;
    let name = match &args.command {
        Command::Equilibrium => "equilibrium",
        Command::Kernel(_) => "kernel",
        Command::Partition(_) => "partition",
        Command::Sample(_) => "sample",
        Command::Verify(_) => "verify",
    };
    let out = output::Output::new(&cfg, name)?;
    match args.command {
        Command::Equilibrium => commands::equilibrium(&cfg, &out),
        Command::Kernel(_) => commands::kernel(&cfg, &out),
        Command::Partition(_) => commands::partition(&cfg, &out),
        Command::Sample(_) => commands::sample(&cfg, &out),
        Command::Verify(_) => commands::verify(&cfg, &out),
    }
}
