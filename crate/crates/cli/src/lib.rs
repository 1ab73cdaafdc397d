//! Command-line experiment harness for evidential partial multi-view
//! classification.
//!
//! Five subcommands cover the full loop: `generate` synthesizes multi-view
//! datasets with controlled missingness and corruption, `train` fits one
//! model per seed and reports accuracy mean±std, `eval` re-scores a saved
//! run on new data, `sweep` grids over missing rates and annealing
//! schedules, and `fuse-demo` walks a five-source Dempster combination
//! against a brute-force oracle.
//!
//! Exit codes: 0 on success, 1 for usage errors (bad flags or values), 2
//! for runtime failures (missing files, numeric divergence). All inputs are
//! loaded before anything is written, so a failing invocation never leaves
//! a partial report behind.

pub mod args;
pub mod artifacts;
pub mod commands;
pub mod corruption;
pub mod demo;
pub mod metrics;

pub use args::Cli;

use args::Command;

/// Environment variable consulted for the default seed when `--seed` /
/// `--seeds` is omitted.
pub const SEED_ENV: &str = "EDPMVC_SEED";

/// Errors split by exit code: usage problems exit 1, runtime failures
/// exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Runtime(err) => write!(f, "{err:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

impl From<edpmvc_core::error::Error> for CliError {
    fn from(err: edpmvc_core::error::Error) -> Self {
        CliError::Runtime(err.into())
    }
}

/// Resolves the default seed: `EDPMVC_SEED` when set (must parse as u64),
/// otherwise 0.
pub fn default_seed() -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            CliError::Usage(format!("{SEED_ENV}={raw:?} is not an unsigned integer"))
        }),
        Err(_) => Ok(0),
    }
}

/// Parses `--seeds`; `None` falls back to the single default seed.
pub fn parse_seed_list(raw: Option<&str>, fallback: u64) -> Result<Vec<u64>, CliError> {
    let Some(raw) = raw else {
        return Ok(vec![fallback]);
    };
    let seeds = parse_list::<u64>(raw, "--seeds")?;
    if seeds.is_empty() {
        return Err(CliError::Usage("--seeds: empty list".into()));
    }
    Ok(seeds)
}

/// Splits a comma-separated list, ignoring empty items (so `""` is an empty
/// list, not a parse error — callers decide whether that is allowed).
pub fn parse_list<T: std::str::FromStr>(raw: &str, flag: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| CliError::Usage(format!("{flag}: cannot parse {s:?}")))
        })
        .collect()
}

/// Runs one parsed command. Separated from `main` so tests can drive the
/// CLI in-process.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => commands::cmd_generate(args),
        Command::Train(args) => commands::cmd_train(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Sweep(args) => commands::cmd_sweep(args),
        Command::FuseDemo => {
            print!("{}", demo::render().map_err(CliError::Runtime)?);
            Ok(())
        }
    }
}
