mod args;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dthazard::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Input { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    /// The input fails the existence condition; the report was already written.
    #[error("the NPMLE does not exist or is not unique for this sample")]
    Existence,
}

pub const EXIT_EXISTENCE: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;
pub const EXIT_INTERNAL: u8 = 70;

impl CliError {
    fn exit_code(&self) -> u8 {
        use dthazard::Error as E;
        match self {
            Self::Existence => EXIT_EXISTENCE,
            Self::Usage(_) => EXIT_USAGE,
            Self::Input { .. } => EXIT_DATA,
            Self::Output { .. } => EXIT_INTERNAL,
            Self::Core(e) => match e {
                E::NonExistence { .. } => EXIT_EXISTENCE,
                E::InvalidParameter(_) => EXIT_USAGE,
                E::EmptySample
                | E::Observability { .. }
                | E::NonFinite { .. }
                | E::DegenerateData(_)
                | E::OutsideUnitInterval { .. }
                | E::Csv { .. }
                | E::Io(_) => EXIT_DATA,
                _ => EXIT_INTERNAL,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match cli.command {
        Command::Check(a) => commands::check(a),
        Command::Fit(a) => commands::fit(a),
        Command::Hazard(a) => commands::hazard(a, "hazard"),
        Command::Bands(mut a) => {
            a.boot.bands.get_or_insert(500);
            commands::hazard(a, "bands")
        }
        Command::Gfun(a) => commands::gfun(a),
        Command::Bandwidth(a) => commands::bandwidth(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
