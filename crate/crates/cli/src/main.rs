//! `dirichlet-mc`: run simulation and estimation experiments from a JSON config.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{invalid, Failure};

#[derive(Debug, Parser)]
#[command(
    name = "dirichlet-mc",
    version,
    about = "Monte Carlo with error-calculus companions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, env = "DIRICHLET_MC_WORKERS")]
    workers: Option<usize>,

    /// Directory for the output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Draw samples of (X, Γ[X], A[X]) and, when available, Γ[X, Γ[X]].
    Simulate,
    /// Density on a grid with the randomized kernel, the classical kernel or the sign formula.
    Density,
    /// Shifted mean X + εA[X] over a sweep of ε, plus the optimal shift.
    Mean,
    /// Error against N and fitted convergence slopes.
    Rates,
    /// Invariant checks on the configured model.
    Check,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Density => "density",
            Command::Mean => "mean",
            Command::Rates => "rates",
            Command::Check => "check",
        }
    }
}

fn output_path(cli: &Cli, configured: Option<&str>, default_name: String) -> PathBuf {
    let file = configured.map_or_else(|| PathBuf::from(default_name), PathBuf::from);
    match &cli.out {
        Some(dir) => dir.join(file),
        None => file,
    }
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| invalid("--config", "required"))?;
    let cfg = config::load(Path::new(path))?;
    let seed = cli
        .seed
        .or(cfg.seed)
        .ok_or_else(|| invalid("seed", "required in the config or via --seed"))?;
    let model = config::build_model(&cfg.model)?;
    let ctx = Context {
        cfg: &cfg,
        model: &model,
        seed,
    };

    let mut failed_check = false;
    let table = match cli.command {
        Command::Simulate => commands::simulate(&ctx)?,
        Command::Density => commands::density(&ctx)?,
        Command::Mean => commands::mean(&ctx)?,
        Command::Rates => commands::rates(&ctx)?,
        Command::Check => {
            let outcome = commands::check(&ctx)?;
            failed_check = !outcome.passed;
            outcome.table
        }
    };

    let format = cfg.output.format;
    let dest = output_path(
        cli,
        cfg.output.path.as_deref(),
        format!("{}.{}", cli.command.name(), format.extension()),
    );
    table.write(&dest, format)?;
    println!(
        "{}: {} rows ({}, seed {seed}) -> {}",
        cli.command.name(),
        table.rows.len(),
        model.name,
        dest.display()
    );
    if failed_check {
        return Err(Failure::Numerical(
            "one or more invariant checks failed; see the report".into(),
        )
        .into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match cli.workers {
        Some(0) => {
            eprintln!("error: {}", invalid("--workers", "must be ≥ 1"));
            return ExitCode::from(2);
        }
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .context("building the worker pool"),
        None => rayon::ThreadPoolBuilder::new()
            .build()
            .context("building the worker pool"),
    };
    let result = pool.and_then(|p| p.install(|| run(&cli)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Failure>() {
                Some(Failure::Validation(_)) => ExitCode::from(2),
                Some(Failure::Numerical(_)) => ExitCode::from(3),
                None => ExitCode::from(1),
            }
        }
    }
}
