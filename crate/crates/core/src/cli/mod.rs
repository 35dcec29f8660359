//! Command-line front end: configuration, subcommands and artifact output.

pub mod check;
pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
pub use check::{run_checks, CheckReport, SuiteResult};
pub use config::Config;
pub use output::{verify_manifest, Manifest, OutputDir};

pub const THREADS_ENV: &str = "RELAXNS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "relaxns",
    version,
    about = "Relaxation Navier-Stokes solver and rate harness"
)]
pub struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides RELAXNS_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Initial-data seed (overrides initial_data.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reference Navier-Stokes run.
    RunNs,
    /// Relaxation-system run with diagnostics.
    RunRelax,
    /// Affine system forced by the reference flux.
    RunAffine,
    /// Parameter sweep with rate fits and bound monitoring.
    Sweep,
    /// Invariant self-tests.
    Check,
    /// CSV data and gnuplot script for a sweep report.
    EmitPlots {
        /// Path to a report.json written by `sweep`.
        report: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::RunNs => "run-ns",
            Command::RunRelax => "run-relax",
            Command::RunAffine => "run-affine",
            Command::Sweep => "sweep",
            Command::Check => "check",
            Command::EmitPlots { .. } => "emit-plots",
        }
    }
}

/// Exit status for a failed command: 2 configuration, 3 divergence, 4 I/O, 1 otherwise.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidGrid(_)
        | Error::Unsupported(_)
        | Error::Certificate(_)
        | Error::Cfl { .. }
        | Error::StepGuard { .. } => 2,
        Error::Diverged(_) | Error::NonFinite { .. } => 3,
        Error::Io(_) => 4,
        _ => 1,
    }
}

/// One-line machine-parsable error report.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace(['\n', '\r'], " ");
    format!("error class={} exit={}: {msg}", e.class(), exit_code(e))
}

/// Thread count from the flag, else the environment, else the rayon default.
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>> {
    let n = match (flag, env) {
        (Some(n), _) => Some(n),
        (None, Some(s)) => Some(
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}")))?,
        ),
        (None, None) => None,
    };
    if n == Some(0) {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", p.display()))),
            other => other,
        })?,
        None => match cli.command {
            Command::Check | Command::EmitPlots { .. } => Config::default(),
            _ => return Err(Error::Config("--config is required".into())),
        },
    };
    if let Some(seed) = cli.seed {
        cfg.initial_data.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    Ok(cfg)
}

/// Runs one parsed invocation; returns the manifest of the outputs.
pub fn run(cli: &Cli) -> Result<Manifest> {
    let env = std::env::var(THREADS_ENV).ok();
    if let Some(n) = resolve_threads(cli.threads, env.as_deref())? {
        // a pool built earlier in this process (tests) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = load_config(cli)?;
    let dir = match &cli.command {
        Command::EmitPlots { report } if cli.out.is_none() => report
            .parent()
            .map(|p| p.join("plots"))
            .unwrap_or_else(|| PathBuf::from("plots")),
        _ => cfg.output.directory.clone(),
    };
    run_command(&cli.command, &cfg, &dir)
}

/// Runs `command` with a loaded configuration, writing into `dir`.
pub fn run_command(command: &Command, cfg: &Config, dir: &Path) -> Result<Manifest> {
    let start = Instant::now();
    let mut out = OutputDir::create(dir)?;
    let name = command.name();
    let mut points = Default::default();
    let result = match command {
        Command::RunNs => commands::cmd_run_ns(cfg, &mut out),
        Command::RunRelax => commands::cmd_run_relax(cfg, &mut out, false),
        Command::RunAffine => commands::cmd_run_relax(cfg, &mut out, true),
        Command::Sweep => commands::cmd_sweep(cfg, &mut out).map(|p| points = p),
        Command::Check => commands::cmd_check(&mut out).map(|_| ()),
        Command::EmitPlots { report } => commands::cmd_emit_plots(report, &mut out),
    };
    out.write_timings(&commands::Timings {
        command: name.to_string(),
        wall_time: start.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        points,
    })?;
    let manifest = out.finish(name)?;
    result.map(|_| manifest)
}

/// Binary entry point.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(m) => {
            println!("{} ok: {} files", cli.command.name(), m.files.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
