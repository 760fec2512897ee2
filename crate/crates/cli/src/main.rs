//! `dadl` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numerical failure. Failures print one line to stderr:
//! `error<TAB><code><TAB><message>`.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use dadl::{DadlError, ErrorClass};

use crate::args::Cli;
use crate::commands::{run, CliError};

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fail(code: &str, msg: &str, exit: u8) -> ExitCode {
    eprintln!("error\t{code}\t{}", one_line(msg));
    ExitCode::from(exit)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail("Usage", first, 2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => fail("Usage", &msg, 2),
        Err(CliError::Core(e)) => {
            let exit = match (&e, e.class()) {
                (DadlError::Config(_), _) => 2,
                (_, ErrorClass::Numerical) => 4,
                (_, ErrorClass::Data) => 3,
            };
            fail(e.code(), &e.to_string(), exit)
        }
    }
}
