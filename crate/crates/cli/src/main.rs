//! `symclt`: run sampling, certification and diagnostic experiments from a
//! JSON config. Exit codes: 0 pass, 1 certification failure, 2 config error,
//! 3 inapplicable bound or method.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

pub const VERSION: &str = env!("SYMCLT_VERSION");

#[derive(Parser)]
#[command(name = "symclt", version = VERSION, about = "Normal-approximation experiments for symmetric random vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples and write them with a moment summary.
    Sample(RunArgs),
    /// Compare theoretical bounds with empirical distances.
    Certify(RunArgs),
    /// Estimate the share of random subspaces with near-normal projections.
    ScanAnk(RunArgs),
    /// Exchangeable-pair, Haar and frame diagnostics.
    Diagnose(RunArgs),
    /// Summarize a reports.json written by `certify`.
    Report {
        /// Path to reports.json.
        input: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const CERTIFICATION: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const INAPPLICABLE: u8 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: Self::CONFIG,
            message: message.into(),
        }
    }
}

impl From<symclt::Error> for Failure {
    fn from(e: symclt::Error) -> Self {
        let code = match e {
            symclt::Error::Unsupported(_) | symclt::Error::WeightedInput => Failure::INAPPLICABLE,
            _ => Failure::CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(e.to_string())
    }
}

fn load(args: &RunArgs, command: &str) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate(command)?;
    let out = cfg.out_dir();
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Sample(args) => {
            let (cfg, out) = load(&args, "sample")?;
            commands::cmd_sample(&cfg, &out)?;
            Ok(true)
        }
        Command::Certify(args) => {
            let (cfg, out) = load(&args, "certify")?;
            let reports = commands::cmd_certify(&cfg, &out)?;
            Ok(!symclt::report::any_failure(&reports))
        }
        Command::ScanAnk(args) => {
            let (cfg, out) = load(&args, "scan-ank")?;
            let path = commands::cmd_scan_ank(&cfg, &out)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Diagnose(args) => {
            let (cfg, out) = load(&args, "diagnose")?;
            let path = commands::cmd_diagnose(&cfg, &out)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Report { input } => commands::cmd_report(&input),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(Failure::CERTIFICATION),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
