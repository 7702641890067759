//! The `stagecraft` command line: argument parsing, provider selection and
//! exit-code mapping around the core and service crates.

pub mod args;
pub mod commands;
pub mod error;

use std::ffi::OsString;
use std::io::{BufRead, Write};

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command};
pub use error::{CliError, EXIT_OK, EXIT_PROVIDER, EXIT_USAGE, EXIT_VALIDATION};

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let sink: &mut dyn Write = if code == EXIT_OK { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli.command, input, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Usage(_) = e {
                let _ = writeln!(err, "run `stagecraft help` for usage");
            }
            e.exit_code()
        }
    }
}

fn dispatch(command: &Command, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => commands::generate(args, out, err),
        Command::Play(args) => commands::play(args, input, out),
        Command::Simulate(args) => commands::simulate(args, out),
        Command::Compare(args) => commands::compare(args, out),
        Command::Validate(args) => commands::validate(args, out),
        Command::Playbook { command } => commands::playbook(command, out),
        Command::Serve(args) => commands::serve(args),
        Command::Adherence(args) => commands::adherence_report(args, out),
    }
}
