use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::info;
use nnha_harness::{emit_outputs, run_experiment, Experiment, ExperimentConfig, HarnessError};

/// Runs one experiment from a TOML configuration and writes its tables,
/// plot data and metadata.
#[derive(Debug, Parser)]
#[command(name = "nnha", version)]
struct Cli {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seeds.master`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `shots`.
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.experiment != cli.experiment {
        return Err(HarnessError::Config(format!(
            "{} configures `{}`, but `{}` was requested",
            cli.config.display(),
            cfg.experiment,
            cli.experiment
        )));
    }
    if let Some(s) = cli.seed {
        cfg.seeds.master = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(m) = cli.shots {
        cfg.shots = m;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    info!("{} with configuration {}", cfg.experiment, cfg.hash());
    let output = run_experiment(&cfg)?;
    for path in emit_outputs(&cfg, &output, &cfg.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nnha: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
