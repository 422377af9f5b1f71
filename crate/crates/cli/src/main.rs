//! `sepcore` command-line front-end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error, 3 numeric
//! failure. Errors are written to stderr as one JSON object.

mod commands;
mod config;
mod data;
mod error;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sepcore::generators::Distribution;
use sepcore::{RootKind, StatKind};

use crate::data::emit;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "sepcore", version, about = "Kronecker-invariant separability tests for matrix-variate data")]
struct Cli {
    /// Worker threads for Monte Carlo loops (0 = all cores). Results do not
    /// depend on this value.
    #[arg(long, global = true, env = "SEPCORE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run separability tests on a data file and print JSON reports.
    Test(TestArgs),
    /// Monte Carlo critical values for a grid of (p1, p2, n).
    Calibrate {
        config: PathBuf,
        /// Output CSV (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical power under shrunk core alternatives.
    Power {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Null samples of the statistics plus a summary.
    NullDist {
        config: PathBuf,
        #[arg(long)]
        samples_out: Option<PathBuf>,
        #[arg(long)]
        summary_out: Option<PathBuf>,
    },
    /// Spectral, BBP and T3 diagnostics.
    Diagnose {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite.
    Validate {
        /// Tracy-Widom table to check instead of the embedded one.
        #[arg(long)]
        tw_table: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Calib {
    Mc,
    Asymptotic,
}

#[derive(Debug, clap::Args)]
pub struct TestArgs {
    /// CSV with one observation per row, `vec(Y_i)` column-stacked.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub p1: usize,
    #[arg(long)]
    pub p2: usize,
    /// Statistics, comma separated: t1, t1a, t1b, t2, t2t, t3, t3t, t3s, lrt.
    #[arg(long, value_delimiter = ',', required = true)]
    pub stat: Vec<StatKind>,
    #[arg(long, value_enum, default_value = "mc")]
    pub calib: Calib,
    /// Innovation law for Monte Carlo calibration: gaussian, gamma:A:B, t:NU.
    #[arg(long, default_value = "gaussian")]
    pub dist: Distribution,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Centre the data before forming the sample covariance.
    #[arg(long)]
    pub center: bool,
    #[arg(long, default_value = "cholesky")]
    pub root: RootKind,
    /// Rows are row-major flattenings of the p1 x p2 observations.
    #[arg(long)]
    pub row_major: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    match cli.command {
        Command::Test(a) => emit(a.out.as_deref(), &commands::test(&a)?),
        Command::Calibrate { config, out } => {
            let (text, cfg_out) = commands::calibrate(&config)?;
            emit(out.or(cfg_out).as_deref(), &text)
        }
        Command::Power { config, out } => {
            let (text, cfg_out) = commands::power(&config)?;
            emit(out.or(cfg_out).as_deref(), &text)
        }
        Command::NullDist {
            config,
            samples_out,
            summary_out,
        } => {
            let c: config::NullDistConfig = config::load(&config)?;
            let samples_path = samples_out
                .or_else(|| c.samples_out.clone())
                .ok_or_else(|| CliError::input("null-dist needs samples_out in the config or --samples-out"))?;
            let summary_path = summary_out.or_else(|| c.summary_out.clone());
            let (samples, summary) = commands::null_dist(&c)?;
            emit(Some(&samples_path), &samples)?;
            emit(summary_path.as_deref(), &summary)
        }
        Command::Diagnose { config, out } => {
            let c: config::DiagnoseConfig = config::load(&config)?;
            let text = commands::diagnose(&c)?;
            emit(out.or(c.out).as_deref(), &text)
        }
        Command::Validate { tw_table } => {
            let outcomes = validate::run(tw_table.as_deref());
            emit(None, &validate::report(&outcomes))?;
            let failed: Vec<&str> = outcomes.iter().filter(|o| o.result.is_err()).map(|o| o.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::validation(format!("failed invariants: {}", failed.join(", "))))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::input(e.render().to_string().trim_end()).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
