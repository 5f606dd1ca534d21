//! Experiment runner behind the `weylwalk` binary.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;

use serde_json::json;
use thiserror::Error;

use config::ExperimentConfig;
use experiments::Verdict;
use output::Manifest;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_STAT_FAIL: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] weylwalk::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(weylwalk::Error::Degenerate(_)) => EXIT_DEGENERATE,
            CliError::Core(weylwalk::Error::Argument(_) | weylwalk::Error::OutsideChamber(_)) => EXIT_USAGE,
            _ => EXIT_OTHER,
        }
    }
}

pub fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_STAT_FAIL,
        Verdict::Degenerate => EXIT_DEGENERATE,
    }
}

/// Runs one experiment into `out`, returning the process exit code.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<u8, CliError> {
    cfg.validate()?;
    let mut man = Manifest::create(out)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml())?;
    man.event("start", json!({ "kind": cfg.kind.as_str(), "seed": cfg.seed, "version": env!("CARGO_PKG_VERSION") }))?;
    let verdict = experiments::run_kind(cfg, &mut man);
    finish(&mut man, verdict)
}

/// Writes the constants table into `out`.
pub fn run_constants(out: &Path) -> Result<u8, CliError> {
    let mut man = Manifest::create(out)?;
    man.event("start", json!({ "kind": "constants", "version": env!("CARGO_PKG_VERSION") }))?;
    let verdict = experiments::constants(&mut man);
    finish(&mut man, verdict)
}

fn finish(man: &mut Manifest, verdict: Result<Verdict, CliError>) -> Result<u8, CliError> {
    match verdict {
        Ok(v) => {
            man.event("end", json!({ "verdict": format!("{v:?}").to_lowercase() }))?;
            Ok(verdict_code(v))
        }
        Err(e) => {
            man.event("end", json!({ "verdict": "error", "error": e.to_string() }))?;
            Err(e)
        }
    }
}
