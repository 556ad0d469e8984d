//! Batch runner for the `nlergodic` solver: JSON configuration in, JSON summary, CSV
//! profiles and a plain-text log out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::json;

pub use commands::{Report, Status};
pub use config::{Command, ExperimentConfig, Overrides};

#[derive(Debug)]
pub enum CliError {
    /// Schema or value error; the message names the field.
    Config(String),
    NonFinite(String),
    /// Divergence under `--strict`.
    StrictDivergence(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonFinite(_) => 3,
            CliError::StrictDivergence(_) => 4,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::NonFinite(m) => write!(f, "numeric failure: {m}"),
            CliError::StrictDivergence(m) => write!(f, "divergence (strict mode): {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Summary document written to `outputs.json`. Contains no timing, host or path data, so
/// equal configurations give byte-identical files.
pub fn summary(cfg: &ExperimentConfig, report: &Report) -> String {
    // Output locations are not part of the experiment.
    let resolved = ExperimentConfig { outputs: config::Outputs::default(), ..cfg.clone() };
    let doc = json!({
        "command": cfg.command.name(),
        "seed": cfg.seed,
        "status": report.status,
        "divergent": report.divergent,
        "config": resolved,
        "constants": report.constants,
        "result": report.result,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
    text.push('\n');
    text
}

pub fn log_text(cfg: &ExperimentConfig, report: &Report) -> String {
    let mut out = format!("command: {}\nseed: {}\nstatus: {:?}\n", cfg.command.name(), cfg.seed, report.status);
    out.push_str(&format!("h = {}, R = {}, m = {}\n", cfg.numeric.h, cfg.numeric.radius, cfg.source.m));
    out.push_str("fitted constants:\n");
    for (name, value) in &report.constants {
        out.push_str(&format!("  {name} = {value}\n"));
    }
    for note in &report.notes {
        out.push_str(&format!("note: {note}\n"));
    }
    out
}

/// Writes via a sibling temporary file so readers never see a partial file.
fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Runs the configured command and writes every requested artifact.
///
/// Divergence is reported as data unless `strict` is set, in which case the artifacts are
/// still written and [`CliError::StrictDivergence`] is returned.
pub fn execute(cfg: &ExperimentConfig, strict: bool) -> Result<Report, CliError> {
    cfg.validate()?;
    let report = commands::run(cfg)?;
    let log = log_text(cfg, &report);
    eprint!("{log}");
    if let Some(path) = &cfg.outputs.json {
        write_atomic(path, &summary(cfg, &report))?;
    }
    if let Some(dir) = &cfg.outputs.csv_dir {
        for (name, text) in &report.tables {
            write_atomic(&dir.join(name), text)?;
        }
    }
    if let Some(path) = &cfg.outputs.log {
        write_atomic(path, &log)?;
    }
    if strict && report.divergent {
        return Err(CliError::StrictDivergence(format!("{} reported divergence", cfg.command.name())));
    }
    Ok(report)
}
