use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polylab::config::{Experiment, ExperimentConfig};
use polylab::error::{exit, LabError};

/// Numerical lab for toy tied-weight autoencoders.
#[derive(Debug, Parser)]
#[command(name = "polylab", version)]
struct Cli {
    /// sparsify, collide, noise-sweep, instance, verify or split-neuron
    experiment: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let experiment: Experiment = cli.experiment.parse()?;
    let mut cfg = ExperimentConfig::defaults(experiment);
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for pair in &cli.set {
        cfg.apply_override(pair)?;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.model.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG as u8 } else { exit::OK as u8 });
        }
    };
    let result = configure(&cli).and_then(|cfg| polylab::run(&cfg));
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("polylab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
