mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = Vec::new();
    let result = match cli.command {
        Command::Test(a) => commands::test(a, &mut out),
        Command::Critval(a) => commands::critval(a, &mut out),
        Command::Power(a) => commands::power(a, &mut out),
        Command::Qq(a) => commands::qq(a, &mut out),
    };
    match result {
        Ok(()) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(&out).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(4);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
