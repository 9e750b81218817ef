//! `exch`: sequential tests of exchangeability from the command line.
//!
//! Exit status: 0 when the run rejected exchangeability, 3 when it completed
//! without rejecting, 4 when `verify-theory` found a failing suite, and 10 or
//! above for errors (10 configuration, 11 input, 12 computation, 13 output).

mod commands;
mod ingest;
mod output;
mod plot;
mod replicate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exch_core::sim::{EvidenceFamily, SourceSpec};
use thiserror::Error;

use crate::ingest::IngestError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_REJECTED: u8 = 0;
pub const EXIT_NOT_REJECTED: u8 = 3;
pub const EXIT_SUITE_FAILED: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Core(#[from] exch_core::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use exch_core::Error as E;
        match self {
            CliError::Config(_) => 10,
            CliError::Ingest(_) => 11,
            CliError::Core(
                E::AlphabetTooSmall(_)
                | E::OrderTooLarge { .. }
                | E::InvalidAlpha(_)
                | E::InvalidParameter { .. }
                | E::Unsupported(_),
            ) => 10,
            CliError::Core(E::SymbolOutOfRange { .. }) => 11,
            CliError::Core(_) => 12,
            CliError::Output { .. } => 13,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "exch",
    version,
    about = "Anytime-valid tests of exchangeability for symbol streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the e-process over one stream and emit its trajectory.
    Test(commands::TestArgs),
    /// Sample a synthetic source and test it, once or over many reps.
    Simulate(commands::SimulateArgs),
    /// Emit the confidence sequence for the one-probability of a binary stream.
    Confseq(commands::ConfseqArgs),
    /// Regenerate one of the reference experiments.
    Replicate(replicate::ReplicateArgs),
    /// Run the randomized checks of the supermartingale results.
    VerifyTheory(commands::VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Calibration {
    /// `R_t` itself.
    Raw,
    /// The calibrator applied to the p-process.
    PProcess,
    /// The adjuster applied to the running maximum.
    Adjusted,
}

/// Which e-process to run and at what level.
#[derive(Debug, Clone, Args)]
pub struct EvidenceArgs {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Markov order of the alternative.
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    /// Alphabet size.
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    /// core, double-mixture, changepoint-mixture or betting.
    #[arg(long, default_value = "core")]
    pub family: String,
    /// Transform applied to the evidence before thresholding.
    #[arg(long, value_enum, default_value_t = Calibration::Raw)]
    pub calibrate: Calibration,
    /// Shorthand for `--calibrate adjusted`.
    #[arg(long)]
    pub adjust: bool,
}

impl EvidenceArgs {
    pub fn family(&self) -> CliResult<EvidenceFamily> {
        Ok(EvidenceFamily::parse(&self.family, self.order)?)
    }

    pub fn calibration(&self) -> CliResult<Calibration> {
        match (self.adjust, self.calibrate) {
            (false, c) => Ok(c),
            (true, Calibration::Raw | Calibration::Adjusted) => Ok(Calibration::Adjusted),
            (true, Calibration::PProcess) => Err(CliError::Config(
                "--adjust conflicts with --calibrate p-process".into(),
            )),
        }
    }
}

/// Where the stream comes from: a file or a synthetic source.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Symbol file, or CSV when --column is given.
    #[arg(long, conflicts_with = "source")]
    pub input: Option<PathBuf>,
    /// CSV column (header name or zero-based index) to binarize.
    #[arg(long, requires = "input")]
    pub column: Option<String>,
    /// Values strictly above this map to 1.
    #[arg(long, default_value_t = 0.0, requires = "column")]
    pub threshold: f64,
    /// Synthetic source, e.g. `bernoulli:0.5` or `markov:0.1,0.9`.
    #[arg(long)]
    pub source: Option<String>,
    /// Number of symbols drawn from --source.
    #[arg(long, default_value_t = 10_000)]
    pub length: usize,
    /// Random seed for --source.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Output locations.
#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// CSV destination (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG plot here.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

pub fn parse_source(s: &str) -> CliResult<SourceSpec> {
    Ok(s.parse::<SourceSpec>()?)
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Test(args) => commands::test(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Confseq(args) => commands::confseq(&args),
        Command::Replicate(args) => replicate::replicate(&args),
        Command::VerifyTheory(args) => commands::verify_theory(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(10)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
