use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nlmimo::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use nlmimo::Error;

/// Massive-MIMO uplink experiments under hardware non-linearities.
#[derive(Debug, Parser)]
#[command(name = "nlmimo", version, after_help = "Worker threads: set NLMIMO_WORKERS (defaults to all cores).")]
struct Cli {
    /// se-cdf | nmse-channel | nmse-variance | ber | dataset-gen | train | eval | export
    experiment: String,

    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,

    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Dotted config override, e.g. `scenario.m=64`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// BS antennas.
    #[arg(short = 'M', long)]
    antennas: Option<usize>,

    /// UEs.
    #[arg(short = 'K', long)]
    users: Option<usize>,

    /// Comma-separated estimators: dua-lmmse, da-lmmse, mc-lmmse-lin, mc-lmmse-log, dl.
    #[arg(long)]
    estimators: Option<String>,

    /// Comma-separated receivers: da-mrc, da-rzf, ew-da-mmse, da-mmse, dua-rzf.
    #[arg(long)]
    receivers: Option<String>,
}

fn list(raw: &str) -> String {
    let items: Vec<String> = raw.split(',').map(|s| format!("\"{}\"", s.trim())).collect();
    format!("[{}]", items.join(","))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::ConfigMismatch { .. } => 2,
        Error::MissingModel(_) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<serde_json::Value, Error> {
    let kind: ExperimentKind = cli.experiment.parse()?;
    let mut overrides = cli.overrides;
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(m) = cli.antennas {
        overrides.push(format!("scenario.m={m}"));
    }
    if let Some(k) = cli.users {
        overrides.push(format!("scenario.k={k}"));
    }
    if let Some(e) = &cli.estimators {
        overrides.push(format!("estimators={}", list(e)));
    }
    if let Some(r) = &cli.receivers {
        overrides.push(format!("receivers={}", list(r)));
    }
    let config = ExperimentConfig::load(&cli.config, &overrides)?;
    run_experiment(kind, &config, &cli.out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nlmimo: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
