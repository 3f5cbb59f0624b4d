mod cmd;
mod opts;

use std::process::ExitCode;

use clap::Parser;
use sampdev_core::Error;

use opts::{Cli, Command, QuantileCommand};

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
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
    let res = match cli.command {
        Command::Calibrate(a) => cmd::calibrate(a),
        Command::Verify(a) => cmd::verify(a),
        Command::Probe(a) => cmd::probe(a),
        Command::Quantile(QuantileCommand::Sim(a)) => cmd::quantile_sim(a),
        Command::Quantile(QuantileCommand::Stationary(a)) => cmd::quantile_stationary(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sampdev: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
