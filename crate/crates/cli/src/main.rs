//! `optoqpg`: fidelity curves, parameter sweeps and oracle checks for the
//! optomechanical phase gate.
//!
//! Exit codes: 0 success, 1 check failure, 2 config error, 3 numerical
//! failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdError;
use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "optoqpg",
    version,
    about = "Optomechanical quantum phase gate simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Start from a named scenario: ideal-nbar0, ideal-nbar10, lossy-nbar0, lossy-nbar10.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Output file (stdout if absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, global = true, env = "OPTOQPG_JOBS")]
    jobs: Option<usize>,

    /// Seed for Monte Carlo cross-checks.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Treat a nonzero ideal-condition residual as a failure in `check`.
    #[arg(long, global = true)]
    strict_ideal: bool,

    /// Override a config key, e.g. `--set nbar=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Gate fidelity versus interaction time, analytic and numeric.
    FidelityCurve,
    /// Fidelity at t_pi over a grid of kappa, nbar, g and q_m.
    Sweep,
    /// Ideal-condition, truncation and oracle checks.
    Check,
    /// Decoherence coefficients by closed form and by matrix traces.
    Oracle,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CmdError> {
    let mut cfg = RunConfig::default();
    if let Some(name) = &cli.preset {
        cfg = RunConfig::preset(name)?;
    }
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CmdError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CmdError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CmdError::Config(format!("cannot write stdout: {e}")))
        }
    }
}

fn run(cli: &Cli) -> Result<(), CmdError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CmdError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CmdError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(cli)?;
    let out = cfg.out.as_deref();
    match cli.command {
        Command::FidelityCurve => emit(out, &commands::fidelity_curve(&cfg)?),
        Command::Sweep => emit(out, &commands::sweep(&cfg)?),
        Command::Check => {
            let (report, verdict) = commands::check(&cfg, cli.strict_ideal);
            emit(out, &report)?;
            verdict
        }
        Command::Oracle => {
            let (csv, summary, verdict) = commands::oracle(&cfg);
            eprint!("{summary}");
            if verdict.is_ok() || matches!(verdict, Err(CmdError::CheckFailed(_))) {
                emit(out, &csv)?;
            }
            verdict
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, msg) = match &e {
                CmdError::CheckFailed(m) => ("check failed", m),
                CmdError::Config(m) => ("config error", m),
                CmdError::Numerical(m) => ("numerical failure", m),
            };
            eprintln!("optoqpg: {kind}: {msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
