use clap::error::ErrorKind;
use clap::Parser;

use edpmvc_cli::{run, Cli, CliError};

/// Exit codes: 0 success (including --help / --version), 1 usage error,
/// 2 runtime failure.
fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // Clap routes help to stdout and errors to stderr by itself.
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
