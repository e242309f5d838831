//! `mvcircle`: spectral solver and bifurcation analysis for stationary
//! McKean-Vlasov equations on the circle.

mod commands;
mod config;
mod output;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mvcircle", version, about = "Stationary McKean-Vlasov analysis on the circle")]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true, default_value = "mvcircle.toml")]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Override a config key, e.g. --set potential.beta=4.0 (repeatable).
    #[arg(long = "set", global = true, action = clap::ArgAction::Append)]
    sets: Vec<String>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sections (0 = library default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the coefficient table with bifurcation points and signatures.
    Spectrum,
    /// Detect and classify bifurcation points off the trivial branch.
    Bifurcate,
    /// Continue all bifurcating branches through the configured kappa range.
    Continue,
    /// Scan the minimum free energy and classify the transition point.
    Energy,
    /// Emit a density profile at a fixed kappa.
    Density {
        #[arg(long)]
        kappa: f64,
        /// Use a specific branch from the catalog instead of the minimizer.
        #[arg(long)]
        branch_id: Option<usize>,
        /// Evaluate the local series representation instead of the solver.
        #[arg(long)]
        series: bool,
        /// Base mode of the series representation.
        #[arg(long, default_value_t = 1)]
        series_mode: usize,
    },
    /// Run the interacting-particle simulation and compare with the solver.
    Simulate {
        #[arg(long)]
        kappa: f64,
    },
}

fn run(cli: Cli) -> Result<(), (u8, anyhow::Error)> {
    let mut config = RunConfig::load(&cli.config, &cli.sets).map_err(|e| (2u8, e))?;
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    if let Some(seed) = cli.seed {
        config.output.seed = seed;
    }
    if let Some(threads) = cli.threads {
        config.output.threads = threads;
    }
    if config.output.threads > 0 {
        // ignore failure: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.output.threads)
            .build_global();
    }
    let result = match cli.command {
        Command::Spectrum => commands::cmd_spectrum(&config),
        Command::Bifurcate => commands::cmd_bifurcate(&config),
        Command::Continue => commands::cmd_continue(&config),
        Command::Energy => commands::cmd_energy(&config),
        Command::Density { kappa, branch_id, series, series_mode } => {
            commands::cmd_density(&config, kappa, branch_id, series, series_mode)
        }
        Command::Simulate { kappa } => commands::cmd_simulate(&config, kappa),
    };
    result.map_err(|e| (3u8, e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
