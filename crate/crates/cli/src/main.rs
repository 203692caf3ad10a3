mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "unicorr", version, about = "Correct functions on a large set so their Fourier series converge in L1")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the universal set, correct the target and write a certificate.
    Run,
    /// Run a parameter grid or the 1/m schedule and write sweep.csv.
    Sweep,
    /// Check the Gram matrices of the shipped systems.
    VerifySystems,
    /// Check the atomic counterexample in exact arithmetic.
    AtomCheck {
        #[arg(long, default_value_t = 100)]
        n_max: u32,
    },
    /// Decay of an oscillatory integral as the frequency doubles.
    Fejer {
        #[arg(long, default_value_t = 1.0 / 3.0)]
        duty: f64,
        #[arg(long, default_value_t = 4)]
        j_min: i32,
        #[arg(long, default_value_t = 12)]
        j_max: i32,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("this command needs --config");
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn dispatch(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Run => {
            let cfg = load(cli)?;
            commands::run(&cfg, &out_dir(cli, Some(&cfg)))
        }
        Command::Sweep => {
            let cfg = load(cli)?;
            commands::sweep(&cfg, &out_dir(cli, Some(&cfg)))
        }
        Command::VerifySystems => {
            let cfg = cli.config.as_ref().map(|_| load(cli)).transpose()?;
            let tol = cfg.as_ref().map_or(1e-8, |c| c.tolerances.gram);
            commands::verify_systems(tol, &out_dir(cli, cfg.as_ref()))
        }
        Command::AtomCheck { n_max } => commands::atom_check(*n_max, &out_dir(cli, None)),
        Command::Fejer { duty, j_min, j_max } => commands::fejer(*duty, *j_min, *j_max, &out_dir(cli, None)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
