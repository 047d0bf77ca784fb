//! `blab <command> --config <file> [--out <dir>] [--workers N] [--seed S]`
//!
//! Exit status: 0 when every check passes, 1 on a suite failure, 2 when the
//! configuration cannot be parsed, 3 on I/O errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::checks::Check;
use crate::config::{Command, RunConfig};
use crate::error::BlabError;
use crate::report::{write_all, Outcome};
use crate::suites;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SUITE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliCommand {
    VerifyIdentities,
    FitExpansion,
    Reduce,
    Continuation,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::VerifyIdentities => Command::VerifyIdentities,
            CliCommand::FitExpansion => Command::FitExpansion,
            CliCommand::Reduce => Command::Reduce,
            CliCommand::Continuation => Command::Continuation,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "blab", version, about = "Bubble laboratory: identity checks, expansion fits and Lyapunov-Schmidt reductions")]
pub struct Args {
    #[arg(value_enum)]
    pub command: CliCommand,
    /// TOML run configuration
    #[arg(long)]
    pub config: PathBuf,
    /// output directory (overrides output_dir in the config)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// worker threads for independent runs
    #[arg(long)]
    pub workers: Option<usize>,
    /// seed for randomized models and property checks
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn exit_code(e: &BlabError) -> i32 {
    match e {
        BlabError::Config(_) => EXIT_CONFIG,
        BlabError::Io(_) => EXIT_IO,
        _ => EXIT_SUITE,
    }
}

/// A pipeline error other than config or I/O, recorded as a failed check.
fn failed_outcome(command: Command, e: &BlabError) -> Outcome {
    let mut out = Outcome::new(command.name());
    out.checks.push(Check::flag("cli_harness", "pipeline_completed", false));
    out.section("error", &e.to_string());
    out
}

/// Run a parsed command; returns the exit status.
pub fn execute(args: &Args) -> i32 {
    let command: Command = args.command.into();
    let cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("blab: {e}");
            return exit_code(&e);
        }
    };
    if let Some(c) = cfg.command {
        if c != command {
            eprintln!(
                "blab: configuration error: config is for '{}' but '{}' was requested",
                c.name(),
                command.name()
            );
            return EXIT_CONFIG;
        }
    }
    let run = || suites::run(command, &cfg, args.seed);
    let result = match args.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("blab: configuration error: {e}");
                return EXIT_CONFIG;
            }
        },
        None => run(),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("blab: {}: {e}", command.name());
            if code != EXIT_SUITE {
                return code;
            }
            failed_outcome(command, &e)
        }
    };
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("blab-out"));
    if let Err(e) = write_all(&dir, &outcome, &cfg, args.seed) {
        eprintln!("blab: {e}");
        return exit_code(&e);
    }
    for c in outcome.checks.iter().filter(|c| !c.pass) {
        println!("{}", c.line());
    }
    let failed = outcome.failures().len();
    println!(
        "{}: {} of {} checks passed; artifacts in {}",
        command.name(),
        outcome.checks.len() - failed,
        outcome.checks.len(),
        dir.display()
    );
    if outcome.pass() {
        EXIT_OK
    } else {
        EXIT_SUITE
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Args::try_parse_from(args) {
        Ok(a) => execute(&a),
        Err(e) => {
            let _ = e.print();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            }
        }
    }
}
