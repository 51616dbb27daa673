//! `ducat` — run experiments, encode/decode contact payloads, demo a
//! transfer over a scripted lossy channel, and inspect peer dumps.
//!
//! Exit codes: 0 success, 2 bad config or malformed input, 3 unwritable
//! output directory, 4 transfer failure.

mod codec;
mod demo;
mod inspect;
mod scores;
mod simulate;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ducat",
    version,
    about = "Offline P2P payments with a gossiped web of trust"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation experiment from a JSON config
    Simulate(simulate::Args),
    /// Encode or decode contact-list payloads
    #[command(subcommand)]
    Codec(codec::Args),
    /// Push sealed random bytes through a lossy channel and verify delivery
    DemoTransfer(demo::Args),
    /// Summarize peer dumps and block exports from a simulation run
    Inspect(inspect::Args),
    /// Show one peer's trust scores with their display bands
    Scores(scores::Args),
}

/// CLI failure with its contractual exit code.
pub(crate) struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    /// Exit 2: unreadable, unparsable, or invalid input.
    pub fn bad_input(message: impl fmt::Display) -> Self {
        CliError {
            message: message.to_string(),
            code: 2,
        }
    }

    /// Exit 3: output location cannot be created or written.
    pub fn unwritable(message: impl fmt::Display) -> Self {
        CliError {
            message: message.to_string(),
            code: 3,
        }
    }

    /// Exit 4: the transfer gave up.
    pub fn transfer_failed(message: impl fmt::Display) -> Self {
        CliError {
            message: message.to_string(),
            code: 4,
        }
    }

    /// Exit 1: internal invariant broke mid-run.
    pub fn internal(message: impl fmt::Display) -> Self {
        CliError {
            message: message.to_string(),
            code: 1,
        }
    }
}

/// Prints one stdout line, exiting quietly when the consumer hung up
/// (e.g. `ducat scores … | head`).
pub(crate) fn emit(line: std::fmt::Arguments) {
    use std::io::Write;
    if writeln!(std::io::stdout(), "{line}").is_err() {
        std::process::exit(0);
    }
}

macro_rules! emitln {
    ($($arg:tt)*) => { $crate::emit(format_args!($($arg)*)) };
}
pub(crate) use emitln;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(args),
        Command::Codec(args) => codec::run(args),
        Command::DemoTransfer(args) => demo::run(args),
        Command::Inspect(args) => inspect::run(args),
        Command::Scores(args) => scores::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
