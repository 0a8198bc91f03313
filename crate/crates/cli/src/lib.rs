//! Command-line experiment runner for [`twophase`].
//!
//! Each subcommand reads a TOML [`config::Config`], runs one experiment and
//! writes CSV/JSON outputs plus a `manifest.json` recording the config hash,
//! the parameter grid and the timing of every task.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod manifest;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

/// Failure of a CLI run, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Library(twophase::Error),
    Io(std::io::Error),
    Check(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use twophase::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Library(E::Config(_) | E::Domain(_) | E::Mesh(_) | E::Data(_) | E::Evaluation { .. }) => 2,
            CliError::Library(E::Solver { .. } | E::Assembly(_) | E::Invariant(_)) => 3,
            CliError::Check(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Check(failed) => write!(f, "check failed: {}", failed.join("; ")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<twophase::Error> for CliError {
    fn from(e: twophase::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "twophase", version, about = "Two-phase homogenization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory, `out/<subcommand>` by default.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Reuse finished tasks from an existing manifest with the same config hash.
    #[arg(long)]
    pub resume: bool,
    /// Compare results against the `[check]` thresholds and exit 4 on failure.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveTarget {
    Oscillating,
    Homogenized,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cell correctors and the homogenized tensor of each phase.
    Cell(CommonArgs),
    /// One transmission solve.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "oscillating")]
        target: SolveTarget,
    },
    /// Convergence rate of the oscillating solution to the homogenized one.
    Rate(CommonArgs),
    /// First-order two-scale expansion error.
    Expansion(CommonArgs),
    /// Decay of the piecewise linear excess around interface points.
    Excess(CommonArgs),
    /// Averaged gradient profiles over shrinking balls.
    Lipschitz(CommonArgs),
    /// Curved versus flat interface comparison on shrinking boxes.
    Stability(CommonArgs),
    /// Closed-form reference values.
    Oracle(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Cell(_) => "cell",
            Command::Solve { .. } => "solve",
            Command::Rate(_) => "rate",
            Command::Expansion(_) => "expansion",
            Command::Excess(_) => "excess",
            Command::Lipschitz(_) => "lipschitz",
            Command::Stability(_) => "stability",
            Command::Oracle(_) => "oracle",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Solve { common, .. } => common,
            Command::Cell(c)
            | Command::Rate(c)
            | Command::Expansion(c)
            | Command::Excess(c)
            | Command::Lipschitz(c)
            | Command::Stability(c)
            | Command::Oracle(c) => c,
        }
    }
}

/// Parses `args` and runs the selected subcommand, returning the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run::execute(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
