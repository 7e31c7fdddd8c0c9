//! Command-line front end: argument parsing, file I/O, run manifests and
//! exit-code mapping. The computations themselves live in `subround`.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use subround::Error;

pub use manifest::{InputDigest, RunManifest};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_CAPACITY: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;
/// `verify` ran but at least one criterion failed.
pub const EXIT_CRITERIA_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "subround", version, about = "Dependent rounding, negative-dependence checks and fair coverage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Result file; stdout when omitted. A manifest is written next to it.
    #[arg(long = "out", value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a negative-dependence notion on a joint table.
    CheckDependence {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// cylinder, one_na, weak_nr, na or nr
        #[arg(long)]
        notion: String,
        #[command(flatten)]
        output: Output,
    },
    /// Round a fractional point repeatedly; one CSV row per trial.
    Round {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// srinivasan, srinivasan-random, independent or scaled
        #[arg(long, default_value = "srinivasan")]
        scheme: String,
        /// Budget for the scaled scheme; defaults to round(Σx).
        #[arg(long)]
        k1: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the per-coordinate marginals; stderr when omitted.
        #[arg(long, value_name = "PATH")]
        summary: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Exact outcome distribution of the dependent rounding (n ≤ 10).
    Dist {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Lower-tail frequencies of a coverage function against the Chernoff bound.
    Tail {
        #[arg(long = "in", alias = "instance", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, default_value = "srinivasan")]
        scheme: String,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.5")]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Both tails of a read-k family sum against the KL bounds.
    Readk {
        #[arg(long = "in", alias = "family", value_name = "PATH")]
        input: PathBuf,
        /// independent, srinivasan, srinivasan-random
        #[arg(long, default_value = "independent")]
        scheme: String,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
        eps: Vec<f64>,
        /// upper, lower or both
        #[arg(long, default_value = "both")]
        tails: String,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Run the three-stage fair-coverage solver.
    SolveFairCoverage {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Continuous-greedy steps; defaults to ⌈10/ε⌉.
        #[arg(long)]
        steps: Option<usize>,
        /// Overrides the instance's accuracy parameter.
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Run the property suite and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = subround::verify::DEFAULT_SEED)]
        seed: u64,
        /// Restrict to these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        #[command(flatten)]
        output: Output,
    },
}

pub(crate) enum Failure {
    Lib(Error),
    Io(String),
    Criteria,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SUBROUND_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Lib(Error::Input(format!("SUBROUND_THREADS = {raw:?} is not a positive integer"))))?;
    // a pool configured earlier in the process wins
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| commands::run(&cli.command, &argv));
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Lib(Error::Input(m)) => (EXIT_INPUT, format!("error: {m}")),
                Failure::Lib(Error::Capacity(m)) => (EXIT_CAPACITY, format!("error: capacity exceeded: {m}")),
                Failure::Lib(Error::Internal(m)) => (EXIT_INTERNAL, format!("error: internal: {m}")),
                Failure::Io(m) => (EXIT_INPUT, format!("error: {m}")),
                Failure::Criteria => (EXIT_CRITERIA_FAILED, "error: some criteria failed".to_string()),
            };
            let _ = writeln!(std::io::stderr(), "{}", msg.replace('\n', " "));
            code
        }
    }
}
