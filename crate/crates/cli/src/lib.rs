//! Command-line front end: reads a JSON run configuration and writes CSV or
//! JSON results.
//!
//! Exit codes: `0` success, `1` failed verification, `2` bad input. Input
//! errors are reported on standard error as `{"error": kind, "message": ...}`.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

pub use config::{Grid, McSettings, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("UsageError", message)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl From<jumpsignal::Error> for CliError {
    fn from(e: jumpsignal::Error) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Optimal fractions over the signal grid, or phi*(0) over a p sweep.
    Policy,
    /// Growth constant over a (p, rho) grid.
    Growth,
    /// Monte-Carlo estimate of the optimal expected utility plus sample paths.
    Simulate,
    /// Full verification suite.
    Verify,
    /// Value function at one point.
    Value,
}

#[derive(Debug, Parser)]
#[command(name = "jumpsignal", version, about = "Optimal investment with jump signals")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; for `simulate` an output directory. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// p grid `a:b:n` for `policy`.
    #[arg(long, value_name = "a:b:n", allow_hyphen_values = true)]
    pub sweep_p: Option<Grid>,
    #[arg(long, value_name = "a:b:n", allow_hyphen_values = true)]
    pub p_grid: Option<Grid>,
    #[arg(long, value_name = "a:b:n", allow_hyphen_values = true)]
    pub rho_grid: Option<Grid>,
    /// Monte-Carlo paths, overriding `mc.nPaths`.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Base seed, overriding `mc.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sample paths written by `simulate`.
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
}

impl Cli {
    fn check_flags(&self) -> Result<(), CliError> {
        let allowed = |flag: &str, set: bool, ok: &[Command]| {
            if set && !ok.contains(&self.command) {
                Err(CliError::usage(format!("--{flag} does not apply to {:?}", self.command).to_lowercase()))
            } else {
                Ok(())
            }
        };
        use Command::*;
        allowed("sweep-p", self.sweep_p.is_some(), &[Policy])?;
        allowed("p-grid", self.p_grid.is_some(), &[Growth])?;
        allowed("rho-grid", self.rho_grid.is_some(), &[Growth])?;
        allowed("paths", self.paths.is_some(), &[Simulate, Verify])?;
        allowed("seed", self.seed.is_some(), &[Simulate, Verify])?;
        allowed("trajectories", self.trajectories.is_some(), &[Simulate])?;
        allowed("t", self.t.is_some(), &[Value])?;
        allowed("x", self.x.is_some(), &[Value])?;
        Ok(())
    }
}

/// Runs one invocation; returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let _ = writeln!(err, "{}", CliError::usage(e.to_string().trim_end()).to_json());
            return EXIT_INPUT;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            EXIT_INPUT
        }
    }
}

fn emit(cli: &Cli, text: &str, out: &mut impl Write) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => output::write_atomic(path, text.as_bytes()),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::new("OutputError", e.to_string())),
    }
}

fn execute(cli: &Cli, out: &mut impl Write) -> Result<i32, CliError> {
    cli.check_flags()?;
    let run = RunConfig::load(&cli.config)?;
    let mut mc = run.mc;
    if let Some(n) = cli.paths {
        mc.n_paths = n;
    }
    if let Some(s) = cli.seed {
        mc.seed = s;
    }
    match cli.command {
        Command::Policy => {
            let text = match cli.sweep_p {
                Some(grid) => commands::policy_sweep(&run, &grid.values())?,
                None => commands::policy(&run)?,
            };
            emit(cli, &text, out)?;
        }
        Command::Growth => {
            let text = commands::growth(&run, cli.p_grid.map(|g| g.values()), cli.rho_grid.map(|g| g.values()))?;
            emit(cli, &text, out)?;
        }
        Command::Simulate => {
            let dir = cli.out.as_ref().ok_or_else(|| CliError::usage("simulate needs --out <directory>"))?;
            let summary = commands::simulate(&run, mc, cli.trajectories.unwrap_or(commands::DEFAULT_TRAJECTORIES), dir)?;
            out.write_all(summary.as_bytes()).map_err(|e| CliError::new("OutputError", e.to_string()))?;
        }
        Command::Verify => {
            let (report, passed) = commands::verify(&run, mc)?;
            emit(cli, &report, out)?;
            return Ok(if passed { EXIT_OK } else { EXIT_VERIFY_FAILED });
        }
        Command::Value => {
            let text = commands::value(&run, cli.t.unwrap_or(0.0), cli.x.unwrap_or(run.market.x0))?;
            emit(cli, &text, out)?;
        }
    }
    Ok(EXIT_OK)
}
