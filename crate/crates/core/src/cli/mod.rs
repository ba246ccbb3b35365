//! The `robinflux` command line.
//!
//! Exit codes: 0 when every check passes, 1 on infrastructure errors
//! (bad config, I/O, solver breakdown), 2 when a check fails.

mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::Fault;
use commands::RunContext;
use config::RunConfig;

use crate::error::{Error, Result};
use crate::green::Regime;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "robinflux", version, about = "Robin boundary-value laboratory on voxel domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration, or a manifest from an earlier run
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// worker threads (default: all cores)
    #[arg(long, global = true, env = "ROBINFLUX_JOBS")]
    pub jobs: Option<usize>,

    /// overrides the acceptance constant of every two-sided check
    #[arg(long = "accept-const", global = true, value_name = "K")]
    pub accept_const: Option<f64>,

    /// run the regime check for this regime instead of the one selected by `a σ(∂Ω)`
    #[arg(long, global = true, value_enum)]
    pub force_regime: Option<RegimeArg>,

    /// reuse cached lung solves under `<out>/cache`
    #[arg(long, global = true)]
    pub resume: bool,

    #[arg(long, global = true, value_enum, hide = true)]
    pub inject_fault: Option<Fault>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Build and save the domain, with its mixed-dimension report
    GenDomain,
    /// Green-function oracle, flux certificates, monotonicity and regime checks
    GreenChecks,
    /// Harmonic-measure suite
    HmChecks,
    /// Total-flow curve, phase report and plot
    Flux,
    /// Summarize the manifests in the output directory
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenDomain => "gen-domain",
            Command::GreenChecks => "green-checks",
            Command::HmChecks => "hm-checks",
            Command::Flux => "flux",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Neumann,
    Dirichlet,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Neumann => Regime::Neumann,
            RegimeArg::Dirichlet => Regime::Dirichlet,
        }
    }
}

/// Loads the config and applies command-line overrides. Nothing is written.
pub fn prepare(cli: &Cli) -> Result<RunContext> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config(format!("{} needs --config", cli.command.name())))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(k) = cli.accept_const {
        if !(k > 1.0 && k.is_finite()) {
            return Err(Error::Config(format!("--accept-const must exceed 1 (got {k})")));
        }
        config.set_acceptance_constant(k);
    }
    let config_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(RunContext {
        config: config.resolved(),
        config_dir,
        out: cli.out.clone(),
        force_regime: cli.force_regime.map(Regime::from),
        fault: cli.inject_fault,
        resume: cli.resume,
    })
}

fn dispatch(cli: &Cli) -> Result<bool> {
    if let Command::Report = cli.command {
        return commands::report(&cli.out);
    }
    let ctx = prepare(cli)?;
    match cli.command {
        Command::GenDomain => commands::gen_domain(&ctx),
        Command::GreenChecks => commands::green_checks(&ctx),
        Command::HmChecks => commands::hm_checks(&ctx),
        Command::Flux => commands::flux(&ctx),
        Command::Report => unreachable!(),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| dispatch(cli)) {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("{}: one or more checks failed", cli.command.name());
            EXIT_CHECK_FAILED
        }
        Err(Error::WrongRegime(msg)) => {
            eprintln!("error: wrong regime: {msg}");
            EXIT_CHECK_FAILED
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            }
        }
    }
}
