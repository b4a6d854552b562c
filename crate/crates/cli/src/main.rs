//! `wmlab`: key generation, embedding, attacks, detection, metrics and sweeps.

mod commands;

use std::process::ExitCode;

use clap::Parser;

use commands::Cli;

/// Exit status for a failed command.
fn exit_code(e: &wmlab_core::Error) -> u8 {
    use wmlab_core::Error::*;
    match e {
        Io { .. } | Image { .. } => 3,
        Validation(_) | Format(_) | Json(_) | Csv(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wmlab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
