//! Command line front end.
//!
//! Exit codes: 0 when every checked claim holds, 1 on an operational error,
//! 2 when the run completed but a claim failed.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

pub use config::{PotentialConfig, RunConfig, TestHooks, ToleranceTable};

use crate::error::{Error, Result};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CLAIM_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tangential-hodge", version, about = "Leafwise Hodge theory and Witten deformation on model foliations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress the summary line.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Leafwise kernel dimensions and their transversal integrals.
    Betti,
    /// Low spectrum of the deformed Laplacian over a list of epsilons.
    WittenSweep,
    /// Tangential singularities, Morse inequalities and the almost-Morse audit.
    MorseScan,
    /// Complex, adjointness, decomposition, transport and block checks.
    HodgeCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Betti => "betti",
            Command::WittenSweep => "witten-sweep",
            Command::MorseScan => "morse-scan",
            Command::HodgeCheck => "hodge-check",
        }
    }
}

fn load(cli: &Cli) -> Result<(RunConfig, PathBuf)> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory (--out or output_dir)".into()))?;
    Ok((config, out))
}

pub fn execute(command: Command, config: &RunConfig) -> Result<commands::Outcome> {
    match command {
        Command::Betti => commands::betti(config),
        Command::WittenSweep => commands::witten_sweep(config),
        Command::MorseScan => commands::morse_scan(config),
        Command::HodgeCheck => commands::hodge_check(config),
    }
}

fn report_error(err: &Error, out: Option<&Path>) {
    let body = json!({ "error": { "kind": err.kind(), "message": err.to_string() } });
    eprintln!("{body}");
    if let Some(dir) = out {
        if std::fs::create_dir_all(dir).is_ok() {
            let mut bytes = serde_json::to_vec_pretty(&body).unwrap_or_default();
            bytes.push(b'\n');
            let _ = std::fs::write(dir.join("error.json"), bytes);
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    let (config, out) = match load(cli) {
        Ok(v) => v,
        Err(e) => {
            report_error(&e, cli.out.as_deref());
            return EXIT_ERROR;
        }
    };
    let outcome = match execute(cli.command, &config).and_then(|o| commands::write_outcome(&out, &o).map(|_| o)) {
        Ok(o) => o,
        Err(e) => {
            report_error(&e, Some(&out));
            return EXIT_ERROR;
        }
    };
    if let Some(e) = &outcome.row_error {
        report_error(e, Some(&out));
        return EXIT_ERROR;
    }
    let verdict = if outcome.pass { "pass" } else { "FAIL" };
    if !cli.quiet {
        let files: Vec<&str> = outcome.files.iter().map(|(n, _)| n.as_str()).collect();
        println!("{}: {verdict} ({} in {})", cli.command.name(), files.join(", "), out.display());
    }
    if outcome.pass {
        EXIT_PASS
    } else {
        EXIT_CLAIM_FAILED
    }
}
