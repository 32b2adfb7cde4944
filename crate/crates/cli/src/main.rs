mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use hanner_core::Error;

use args::{apply_config, Cli};
use commands::Status;

const EXIT_INTERNAL: u8 = 1;
const EXIT_VERIFICATION: u8 = 2;
const EXIT_USAGE: u8 = 3;

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Verification(_) => EXIT_VERIFICATION,
        Error::Overflow(_) => EXIT_INTERNAL,
        Error::Usage(_) | Error::Precision(_) | Error::Guard(_) | Error::BudgetExceeded { .. } => {
            EXIT_USAGE
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("HANNER_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("HANNER_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let argv = match apply_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match commands::run(cli.command, cli.format) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            if out
                .write_all(report.stdout.as_bytes())
                .and_then(|_| out.flush())
                .is_err()
            {
                return ExitCode::from(EXIT_INTERNAL);
            }
            eprint!("{}", report.stderr);
            match report.status {
                Status::Ok => ExitCode::SUCCESS,
                Status::Failed(msg) => {
                    eprintln!("check failed: {msg}");
                    ExitCode::from(EXIT_VERIFICATION)
                }
                Status::Rejected(msg) => {
                    eprintln!("cross-check failed: {msg}");
                    ExitCode::from(EXIT_USAGE)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
