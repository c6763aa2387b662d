//! `stabsurv`: run samplers, spectral solves, bound evaluations and
//! verification experiments from TOML configs.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use stabsurv::harness::Verdict;
use stabsurv::Error;

pub const SEED_ENV: &str = "STABSURV_SEED";

#[derive(Parser, Debug)]
#[command(name = "stabsurv", version, about = "Survival and exit-time experiments for symmetric stable processes")]
struct Cli {
    /// Worker threads for Monte Carlo (0 = all cores).
    #[arg(long, global = true, env = "STABSURV_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

/// Config file plus run-time adjustments shared by the config-driven commands.
#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Experiment config (TOML). Defaults: spectral.resolutions = [256, 512, 1024],
    /// fit.window = {kind = "counts", min_survivors = 100, max_fraction = 0.2},
    /// fit.eps = 0.01, fit.tol_factor = 3, mc.grid_step = 0.05.
    #[arg(long, short)]
    pub config: PathBuf,

    /// Override a config value, e.g. `--set mc.n_paths=50000` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Seed override; also read from the STABSURV_SEED environment variable.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory for bundles and CSV files.
    #[arg(long, short, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write sample paths of the free process from the start point.
    Sample {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of paths.
        #[arg(long, default_value_t = 10)]
        paths: usize,
    },
    /// Survival curve and decay fit at the start point.
    Survival {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Mean exit times at the start point and the configured probes.
    Meanexit {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Bottom of the spectrum of an interval (or of a config's domain).
    Spectrum {
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        halfwidth: f64,
        /// Resolution ladder, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [256usize, 512, 1024])]
        ladder: Vec<usize>,
        /// Write the ladder as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate a closed-form bound.
    Bound(BoundArgs),
    /// Run a verification experiment; exit 0 pass, 2 fail, 3 inconclusive.
    Verify {
        /// thm-1-1, cor-1-2, thm-1-3, prop-1-4, thm-1-6 or iteration-3-2;
        /// taken from the config when omitted.
        #[arg(long)]
        theorem: Option<String>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render a saved result bundle as markdown.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        /// Runtimes CSV written next to the bundle.
        #[arg(long)]
        timings: Option<PathBuf>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Formula {
    InradiusLower,
    IterationExponent,
    PrelimExponent,
    LimitRate,
    SurvivalEnvelope,
    FreeKernel,
    DirichletKernel,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Units {
    Seminorm,
    Generator,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    pub formula: Formula,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long)]
    pub alpha: f64,
    /// C^{1,1} scale.
    #[arg(long = "r")]
    pub r: Option<f64>,
    /// Inradius.
    #[arg(long = "R")]
    pub big_r: Option<f64>,
    #[arg(long, value_enum, default_value_t = Units::Generator)]
    pub units: Units,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub n: u32,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub dist: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub delta_x: Option<f64>,
    #[arg(long)]
    pub delta_y: Option<f64>,
}

/// What a command achieved, mapped to the process exit status.
pub enum Outcome {
    Done,
    Verdict(Verdict),
}

fn exit_code(result: &Result<Outcome, Error>) -> u8 {
    match result {
        Ok(Outcome::Done) | Ok(Outcome::Verdict(Verdict::Pass)) => 0,
        Ok(Outcome::Verdict(Verdict::Fail)) => 2,
        Ok(Outcome::Verdict(Verdict::Inconclusive)) => 3,
        Err(_) => 1,
    }
}

fn describe(e: &Error) -> String {
    match e {
        Error::Config(_) | Error::SchemaVersion { .. } => format!("schema error: {e}"),
        Error::Hypothesis(m) => format!("theorem hypothesis violation: {m}"),
        Error::NonConvergence { .. } => format!("numerical non-convergence: {e}"),
        _ => format!("error: {e}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Only fails if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let result = match cli.command {
        Command::Sample { cfg, paths } => commands::sample(&cfg, paths),
        Command::Survival { cfg } => commands::survival(&cfg),
        Command::Meanexit { cfg } => commands::meanexit(&cfg),
        Command::Spectrum {
            config,
            alpha,
            halfwidth,
            ladder,
            csv,
        } => commands::spectrum(config.as_deref(), alpha, halfwidth, &ladder, csv.as_deref()),
        Command::Bound(args) => commands::bound(&args),
        Command::Verify { theorem, cfg } => commands::verify(theorem.as_deref(), &cfg),
        Command::Report { bundle, timings, out } => commands::report(&bundle, timings.as_deref(), out.as_deref()),
    };
    if let Err(e) = &result {
        eprintln!("{}", describe(e));
    }
    ExitCode::from(exit_code(&result))
}
