mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::{Cli, CliError};

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::InvalidSubcommand => 3,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => {
            eprintln!("dnls-lab: FAIL");
            1
        }
        Err(e) => {
            eprintln!("dnls-lab: {e}");
            match e {
                CliError::Config(_) => 2,
                CliError::Io(_) => 4,
                CliError::Failed(_) => 1,
            }
        }
    }
}
