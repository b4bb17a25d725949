//! `nlslope`: run the slope-transformation test, simulations and curve export.

mod commands;
mod input;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nlslope_core::sim::CovariateDesign;
use nlslope_core::{BandwidthPolicy, BootstrapScheme, Kernel, QuadratureKind, SupRegion, TestConfig};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input or configuration.
    Input(String),
    /// The numerical procedure itself failed.
    Numerical(String),
}

impl CliError {
    pub fn from_core(e: nlslope_core::Error, context: Option<&Path>) -> Self {
        let msg = match context {
            Some(p) => format!("{}: {e}", p.display()),
            None => e.to_string(),
        };
        if e.is_numerical() {
            CliError::Numerical(msg)
        } else {
            CliError::Input(msg)
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<nlslope_core::Error> for CliError {
    fn from(e: nlslope_core::Error) -> Self {
        CliError::from_core(e, None)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "nlslope",
    version,
    about = "Test whether two functional regression slopes differ by a non-linear transformation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the test on two groups and write a JSON report.
    Test(TestArgs),
    /// Run a simulation design and write its summary row and statistics.
    Simulate(SimulateArgs),
    /// Export the estimated slopes and second-derivative curve as CSV.
    Curves(CurvesArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Group 1 curves: header `id,t1,...,tG`, one subject per row.
    #[arg(long)]
    pub group1_curves: PathBuf,
    /// Group 1 responses: `id,y`.
    #[arg(long)]
    pub group1_y: PathBuf,
    /// Group 2 curves, same layout as group 1
    #[arg(long)]
    pub group2_curves: PathBuf,
    /// Group 2 responses
    #[arg(long)]
    pub group2_y: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum KernelArg {
    Gauss,
    Epan,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum SchemeArg {
    Centered,
    Literal,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum RegionArg {
    Full,
    Trimmed,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum QuadratureArg {
    Trapezoid,
    Cells,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum CovariatesArg {
    Independent,
    Shared,
}

/// Test settings. Unset flags keep the value from `--config` or the default.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// Fraction of variance explained that selects the number of components.
    #[arg(long)]
    pub fve: Option<f64>,
    /// Kernel of the local cubic smoother
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// `rot` or `fixed:<h>`.
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Multiplier applied to the rule-of-thumb bandwidth.
    #[arg(long)]
    pub inflate: Option<f64>,
    /// Number of pairing time points.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of evaluation points for the second derivative.
    #[arg(long)]
    pub eval_grid: Option<usize>,
    /// Boundary trim fractions `lo,hi`.
    #[arg(long)]
    pub trim: Option<String>,
    /// Where the supremum is taken: the whole range of V or the trimmed span
    #[arg(long, value_enum)]
    pub sup_region: Option<RegionArg>,
    /// Quadrature weights for integrals over t
    #[arg(long, value_enum)]
    pub quadrature: Option<QuadratureArg>,
    /// Nominal level of the test
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Random seed; drawn at random and recorded in the manifest when absent
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Worker threads; 0 picks the number of cores. Does not affect results.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    /// JSON file with a (partial) test configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: ConfigArgs,
    /// Bootstrap replicates.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Residual bootstrap scheme
    #[arg(long, value_enum)]
    pub bootstrap_scheme: Option<SchemeArg>,
    /// Calibrate with the limiting Gaussian process instead of the bootstrap.
    #[arg(long)]
    pub asymptotic: bool,
    /// Monte Carlo draws of the Gaussian process supremum.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: ConfigArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON file with a simulation spec.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Example 1 to 4; example 1 is the linear null.
    #[arg(long)]
    pub example: Option<u8>,
    /// Subjects per group.
    #[arg(long)]
    pub n: Option<usize>,
    /// Decay exponent of the covariate score standard deviations, `r^-alpha0`
    #[arg(long)]
    pub alpha0: Option<f64>,
    /// Monte Carlo replicates
    #[arg(long)]
    pub reps: Option<usize>,
    /// Whether the two groups share covariate curves
    #[arg(long, value_enum)]
    pub covariates: Option<CovariatesArg>,
    #[command(flatten)]
    pub settings: ConfigArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

fn parse_trim(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Input(format!("--trim expects `lo,hi`, got {s:?}"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn parse_bandwidth(s: &str, inflate: Option<f64>, current: BandwidthPolicy) -> Result<BandwidthPolicy, CliError> {
    let current_inflation = match current {
        BandwidthPolicy::RuleOfThumb { inflation } => inflation,
        BandwidthPolicy::Fixed { .. } => nlslope_core::types::DEFAULT_INFLATION,
    };
    if s == "rot" {
        return Ok(BandwidthPolicy::RuleOfThumb { inflation: inflate.unwrap_or(current_inflation) });
    }
    let h = s
        .strip_prefix("fixed:")
        .and_then(|h| h.parse::<f64>().ok())
        .ok_or_else(|| CliError::Input(format!("--bandwidth expects `rot` or `fixed:<h>`, got {s:?}")))?;
    if inflate.is_some() {
        return Err(CliError::Input("--inflate applies only to the rule-of-thumb bandwidth".into()));
    }
    Ok(BandwidthPolicy::Fixed { h })
}

impl ConfigArgs {
    /// Overrides `cfg` with every flag that was given.
    pub fn apply(&self, cfg: &mut TestConfig) -> Result<(), CliError> {
        if let Some(v) = self.fve {
            cfg.fve_threshold = v;
        }
        if let Some(k) = self.kernel {
            cfg.kernel = match k {
                KernelArg::Gauss => Kernel::Gaussian,
                KernelArg::Epan => Kernel::Epanechnikov,
            };
        }
        match (&self.bandwidth, self.inflate) {
            (Some(s), inflate) => cfg.bandwidth = parse_bandwidth(s, inflate, cfg.bandwidth)?,
            (None, Some(inflation)) => match cfg.bandwidth {
                BandwidthPolicy::RuleOfThumb { .. } => cfg.bandwidth = BandwidthPolicy::RuleOfThumb { inflation },
                BandwidthPolicy::Fixed { .. } => {
                    return Err(CliError::Input("--inflate applies only to the rule-of-thumb bandwidth".into()))
                }
            },
            (None, None) => {}
        }
        if let Some(m) = self.m {
            cfg.pairing_points = m;
        }
        if let Some(g) = self.eval_grid {
            cfg.eval_grid_size = g;
        }
        if let Some(t) = &self.trim {
            cfg.boundary_trim = parse_trim(t)?;
        }
        if let Some(r) = self.sup_region {
            cfg.sup_region = match r {
                RegionArg::Full => SupRegion::Full,
                RegionArg::Trimmed => SupRegion::Trimmed,
            };
        }
        if let Some(q) = self.quadrature {
            cfg.quadrature = match q {
                QuadratureArg::Trapezoid => QuadratureKind::Trapezoid,
                QuadratureArg::Cells => QuadratureKind::UnitCells,
            };
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        Ok(())
    }
}

impl SchemeArg {
    pub fn scheme(self) -> BootstrapScheme {
        match self {
            SchemeArg::Centered => BootstrapScheme::Centered,
            SchemeArg::Literal => BootstrapScheme::Literal,
        }
    }
}

impl CovariatesArg {
    pub fn design(self) -> CovariateDesign {
        match self {
            CovariatesArg::Independent => CovariateDesign::Independent,
            CovariatesArg::Shared => CovariateDesign::Shared,
        }
    }
}

fn with_threads<T>(threads: usize, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start thread pool: {e}")))?;
    pool.install(f)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(args) => with_threads(args.run.threads, || commands::test(&args)),
        Command::Simulate(args) => with_threads(args.run.threads, || commands::simulate(&args)),
        Command::Curves(args) => with_threads(args.run.threads, || commands::curves(&args)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nlslope: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
