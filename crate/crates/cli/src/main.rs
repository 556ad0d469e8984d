use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nlergodic_cli::{execute, Command, ExperimentConfig, Overrides};

/// Runs solver experiments described by a JSON configuration.
///
/// Flags take precedence over the configuration file, which takes precedence over defaults.
#[derive(Parser, Debug)]
#[command(name = "nlergodic", version)]
struct Cli {
    /// Command to run; overrides `command` in the file.
    #[arg(value_enum)]
    command: Option<Command>,
    /// Experiment configuration (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Treat divergence as failure (exit status 4).
    #[arg(long)]
    strict: bool,
    /// Seed for randomized checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid spacing.
    #[arg(long)]
    h: Option<f64>,
    /// Truncation radius.
    #[arg(long = "R")]
    radius: Option<f64>,
    #[arg(long)]
    csv_dir: Option<PathBuf>,
    #[arg(long)]
    json_out: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        command: cli.command,
        seed: cli.seed,
        h: cli.h,
        radius: cli.radius,
        csv_dir: cli.csv_dir,
        json_out: cli.json_out,
        log: cli.log,
    };
    let result = ExperimentConfig::load(&cli.config).and_then(|mut cfg| {
        cfg.apply(&overrides);
        execute(&cfg, cli.strict)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
