use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod error;
mod experiments;

use config::ExperimentName;
use error::CliError;

/// Spectral Galerkin experiments for the damped quintic wave equation.
#[derive(Debug, Parser)]
#[command(name = "qwl", version)]
struct Cli {
    /// Worker threads for parallel ensembles (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// `key=value` overrides with dotted keys, e.g. `time.dt=1e-3`.
        overrides: Vec<String>,
    },
    /// Parse and validate a config without running it.
    Validate {
        config: PathBuf,
        overrides: Vec<String>,
    },
    /// List the available experiments.
    ListExperiments,
}

const OUTPUT_ENV: &str = "QWL_OUTPUT_DIR";

fn prepare(path: &PathBuf, overrides: &[String]) -> Result<(config::ExperimentConfig, config::Setup), CliError> {
    let mut cfg = config::load(path, overrides)?;
    if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    let setup = cfg.validate()?;
    experiments::preflight(&cfg, &setup)?;
    Ok((cfg, setup))
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::validation("jobs", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation("jobs", e.to_string()))?;
    }
    match cli.command {
        Command::ListExperiments => {
            for (_, name, about) in ExperimentName::ALL {
                println!("{name:<24}{about}");
            }
            Ok(0)
        }
        Command::Validate { config, overrides } => {
            let (cfg, _) = prepare(&config, &overrides)?;
            println!("{}: ok ({})", config.display(), cfg.experiment.name.as_str());
            Ok(0)
        }
        Command::Run { config, overrides } => {
            let (cfg, setup) = prepare(&config, &overrides)?;
            let summary = experiments::run(&cfg, &setup, &cfg.output_dir)?;
            for c in &summary.checks {
                let limit = c.limit.map_or(String::new(), |l| format!(" (limit {l:e})"));
                println!("{} {}: {:e}{limit}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
            }
            println!("{}: {}", summary.experiment, cfg.output_dir.join("summary.json").display());
            Ok(if summary.pass { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
