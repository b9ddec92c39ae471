//! Command-line front end for the `lerwlab` estimators and validation
//! suites.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

use clap::Parser;

use args::Cli;
use commands::Status;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

/// Runs the tool on a full argument list (program name first) and returns
/// the process exit code.
pub fn run(raw: Vec<String>) -> i32 {
    let args = match config::merge(raw.clone()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut command_line = raw;
    if let Some(first) = command_line.first_mut() {
        *first = "lerwlab".into();
    }
    match commands::execute(cli.command, command_line) {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::ChecksFailed) => EXIT_VALIDATION,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}
