//! `sqe`: every pipeline stage as a subcommand.
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.
//! Diagnostics go to standard error; data goes to standard output or `--out`.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::UsageError;

const USAGE: u8 = 1;
const DATA: u8 = 2;

fn write_output(path: Option<&std::path::Path>, data: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, data),
        None => std::io::stdout().lock().write_all(data.as_bytes()),
    }
}

/// The error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut last = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !last.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        last = msg;
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    let output = match commands::run(&cli.command) {
        Ok(o) => o,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return ExitCode::from(DATA);
        }
    };
    if let Err(e) = write_output(commands::out_path(&cli.command), &output.data) {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(DATA);
    }
    if let (Some(report), Command::Run(a)) = (&output.report, &cli.command) {
        let written = match &a.report {
            Some(p) => std::fs::write(p, report),
            None => std::io::stderr().lock().write_all(report.as_bytes()),
        };
        if let Err(e) = written {
            eprintln!("error: writing report: {e}");
            return ExitCode::from(DATA);
        }
    }
    ExitCode::SUCCESS
}
