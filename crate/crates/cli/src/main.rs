//! `convint`: demos, verification suites and frame export.
//!
//! Exit codes: 0 all checks pass, 1 numerical failure, 2 usage or
//! configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

impl From<convint::Error> for CliError {
    fn from(e: convint::Error) -> Self {
        match e {
            convint::Error::WindingMismatch { .. } | convint::Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o error: {e}"))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "convint",
    version,
    about = "Convex integration demos and verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// JSON file with run parameters; flags take precedence
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regular homotopy between two plane curves of equal winding number
    Wg {
        /// circle-ellipse or circle-reversed [default: circle-ellipse]
        #[arg(long)]
        preset: Option<String>,
        /// Samples per frame [default: 1024]
        #[arg(long)]
        grid: Option<String>,
        /// C0 budget [default: 0.05]
        #[arg(long)]
        eps: Option<f64>,
        /// Frames written [default: 11]
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Formal sphere eversion by rotation: OBJ frames and singular value floor
    EversionFormal {
        /// Mesh and check grid, LATxLON [default: 40x80]
        #[arg(long)]
        grid: Option<String>,
        /// Frames written [default: 11]
        #[arg(long)]
        frames: Option<usize>,
        /// Radius of the ball where the relation is unconstrained [default: 0.9]
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Experimental: corrugate a patch of the formal eversion and report
    EversionCorrugate {
        /// Probe grid per axis [default: 3]
        #[arg(long)]
        grid: Option<String>,
        /// C0 budget [default: 0.05]
        #[arg(long)]
        eps: Option<f64>,
        /// Radius of the ball where the relation is unconstrained [default: 0.9]
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite and write its residual table
    Verify {
        /// corrugation, loops, reparam, convex, sphere or all [default: all]
        #[arg(long)]
        suite: Option<String>,
        /// Seed for random instances [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common, flags: RunConfig) -> Result<RunConfig, CliError> {
    let file = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(file.merge(RunConfig {
        out: common.out.clone(),
        ..flags
    }))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Wg {
            preset,
            grid,
            eps,
            frames,
            common,
        } => {
            let cfg = resolve(
                &common,
                RunConfig {
                    preset,
                    grid,
                    eps,
                    frames,
                    ..Default::default()
                },
            )?;
            commands::wg(&cfg)
        }
        Command::EversionFormal {
            grid,
            frames,
            radius,
            common,
        } => {
            let cfg = resolve(
                &common,
                RunConfig {
                    grid,
                    frames,
                    radius,
                    ..Default::default()
                },
            )?;
            commands::eversion_formal(&cfg)
        }
        Command::EversionCorrugate {
            grid,
            eps,
            radius,
            common,
        } => {
            let cfg = resolve(
                &common,
                RunConfig {
                    grid,
                    eps,
                    radius,
                    ..Default::default()
                },
            )?;
            commands::eversion_corrugate(&cfg)
        }
        Command::Verify { suite, seed, common } => {
            let cfg = resolve(
                &common,
                RunConfig {
                    suite,
                    seed,
                    ..Default::default()
                },
            )?;
            commands::verify(&cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
