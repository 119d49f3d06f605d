use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ratetruth::commands::{self, LearnOptions, ReproduceOptions};
use ratetruth::config::{load_problem, Overrides};
use ratetruth::{CliError, Result};
use ratetruth_core::scenarios::{ScenarioId, EXAMPLE1_GRID_MAX, REPRODUCE_MAX_ITER};
use ratetruth_core::solver::{SweepMode, DEFAULT_TOL};
use ratetruth_core::truth::Normalization;
use ratetruth_core::Variant;

/// Minimum-mutual-information channels: R(D), R(Θ) and R(G) curves.
///
/// Exit status: 0 success, 1 numeric or check failure, 2 usage or config
/// error.
#[derive(Parser)]
#[command(name = "ratetruth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("`{s}` is not one of rd, rtheta, rg"))
}

#[derive(Args)]
struct SolverArgs {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Slope parameter; negative for rd, nonnegative for rtheta and rg.
    #[arg(long, allow_negative_numbers = true)]
    s: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolverArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            variant: self.variant,
            s: self.s,
            s_grid: None,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Example1,
    Example2,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    Global,
    PerLabel,
}

#[derive(Subcommand)]
enum Command {
    /// Solve at one s; writes result.json and channel.csv.
    Solve(SolverArgs),
    /// Rate curve over an s grid; writes curve.csv.
    Sweep {
        #[command(flatten)]
        solver: SolverArgs,
        /// `a:b:n` or `a:b:n:geometric`.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "s")]
        s_grid: Option<String>,
        /// Start every point from the uniform marginal (allows --jobs).
        #[arg(long)]
        cold: bool,
        /// Threads for cold-start sweeps.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Learn truth functions from a joint CSV (probabilities or counts).
    LearnTruth {
        #[arg(long)]
        joint: PathBuf,
        #[arg(long, value_enum, default_value_t = NormalizationArg::Global)]
        normalization: NormalizationArg,
        /// Families to fit, comma separated: rise, fall, bump:POWER. One
        /// per label, or one for all.
        #[arg(long, value_delimiter = ',')]
        fit: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum-entropy channel and entropy decomposition.
    Maxent {
        #[command(flatten)]
        solver: SolverArgs,
        /// Feature constraints (JSON list of {feature, bound, multiplier}).
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Check the local-equilibrium entropy decomposition of a system file.
    BoltzmannCheck {
        /// ThermoSystem JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a worked example and compare with its targets.
    Reproduce {
        #[arg(value_enum)]
        scenario: Scenario,
        #[arg(long, value_parser = parse_variant, default_value = "rtheta")]
        variant: Variant,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        s: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = REPRODUCE_MAX_ITER)]
        max_iter: usize,
        /// Upper end of the Example 1 age grid.
        #[arg(long, default_value_t = EXAMPLE1_GRID_MAX, allow_negative_numbers = true)]
        grid_max: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grey-level histogram of a binary PGM image.
    IngestPgm {
        image: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    match cli.command {
        Command::Solve(a) => {
            let p = load_problem(&a.config, &a.overrides())?;
            commands::solve(&p, a.out.as_deref(), &mut w)
        }
        Command::Sweep {
            solver,
            s_grid,
            cold,
            jobs,
        } => {
            if jobs == 0 {
                return Err(CliError::config("jobs", "must be at least 1"));
            }
            let mut ov = solver.overrides();
            ov.s_grid = s_grid;
            let p = load_problem(&solver.config, &ov)?;
            let mode = if cold { SweepMode::ColdStart } else { SweepMode::WarmStart };
            commands::sweep(&p, mode, jobs, solver.out.as_deref(), &mut w)
        }
        Command::LearnTruth {
            joint,
            normalization,
            fit,
            out,
        } => {
            let opts = LearnOptions {
                joint,
                normalization: match normalization {
                    NormalizationArg::Global => Normalization::Global,
                    NormalizationArg::PerLabel => Normalization::PerLabel,
                },
                fit: fit.iter().map(|f| commands::parse_family(f)).collect::<Result<_>>()?,
            };
            commands::learn_truth(&opts, out.as_deref(), &mut w)
        }
        Command::Maxent { solver, features } => {
            let p = load_problem(&solver.config, &solver.overrides())?;
            commands::maxent(&p, features.as_deref(), solver.out.as_deref(), &mut w)
        }
        Command::BoltzmannCheck { config, out } => commands::boltzmann_check(&config, out.as_deref(), &mut w),
        Command::Reproduce {
            scenario,
            variant,
            s,
            tol,
            max_iter,
            grid_max,
            out,
        } => {
            let scenario = match scenario {
                Scenario::Example1 => ScenarioId::Example1 { grid_max },
                Scenario::Example2 => ScenarioId::Example2,
            };
            let o = ReproduceOptions {
                scenario,
                variant,
                s,
                tol,
                max_iter,
            };
            commands::reproduce_scenario(&o, out.as_deref(), &mut w)
        }
        Command::IngestPgm { image, out } => commands::ingest(&image, out.as_deref(), &mut w),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
