//! `securelr`: data-owner, party and dealer entry points for secure logistic regression.

mod bench;
mod config;
mod files;
mod split;
mod train;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use securelr::{Error, FixedPointParams};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String, io::Error),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(path, e) => write!(f, "{path}: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(..) => 4,
            CliError::Core(e) => match e {
                Error::Argument(_) | Error::Dimension(_) => 2,
                Error::Handshake(_) => 3,
                e if e.is_transport() => 3,
                Error::RandomnessUnderflow { .. } => 5,
                Error::Format(_) | Error::Ingest { .. } | Error::Range { .. } | Error::RandomnessMismatch { .. } => 4,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "securelr", version, about = "Two-party secure logistic regression with a trusted initializer")]
#[command(args_override_self = true)]
struct Cli {
    /// Flat key = value file whose settings act as flags (explicit flags win).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a CSV and split it into one share file per party.
    Split(split::SplitArgs),
    /// Run one role of the training protocol.
    Train(train::TrainArgs),
    /// Combine two weight-share files into decoded weights.
    Reconstruct(files::ReconstructArgs),
    /// Concatenate share files from several data owners.
    Merge(files::MergeArgs),
    /// Time batched protocol steps in one process.
    Bench(bench::BenchArgs),
}

/// Fixed-point parameters shared by every subcommand.
#[derive(Args, Clone, Debug)]
pub struct ParamArgs {
    /// Fractional bits a.
    #[arg(long, default_value_t = 12)]
    pub frac_bits: u32,
    /// Integer bits b.
    #[arg(long, default_value_t = 15)]
    pub int_bits: u32,
    /// Ring width λ (8, 16, 32 or 64).
    #[arg(long, default_value_t = 64)]
    pub ring_bits: u32,
}

impl ParamArgs {
    pub fn params(&self) -> CliResult<FixedPointParams> {
        Ok(FixedPointParams::new(self.frac_bits, self.int_bits, self.ring_bits)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PartyRole {
    Ti,
    Alice,
    Bob,
    Local,
}

/// Runs `$body` with `$w` bound to the word type of a ring width.
#[macro_export]
macro_rules! with_word {
    ($bits:expr, $w:ident => $body:expr) => {
        match $bits {
            8 => {
                type $w = u8;
                $body
            }
            16 => {
                type $w = u16;
                $body
            }
            32 => {
                type $w = u32;
                $body
            }
            64 => {
                type $w = u64;
                $body
            }
            other => Err($crate::CliError::Usage(format!("unsupported ring width {other}"))),
        }
    };
}

/// Prints `key=value` lines to stdout and flushes, for scripts that wait on them.
pub fn emit(pairs: &[(&str, String)]) {
    let mut out = io::stdout().lock();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}={v}");
    }
    let _ = out.flush();
}

/// Prints one line of space-separated `key=value` pairs.
pub fn emit_line(pairs: &[(&str, String)]) {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let mut out = io::stdout().lock();
    let _ = writeln!(out, "{}", line.join(" "));
    let _ = out.flush();
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match config::expand(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Split(a) => split::run(&a),
        Command::Train(a) => train::run(&a),
        Command::Reconstruct(a) => files::reconstruct(&a),
        Command::Merge(a) => files::merge(&a),
        Command::Bench(a) => bench::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("securelr: {e}");
    ExitCode::from(e.exit_code())
}
