mod args;
mod common;
mod compare;
mod eval;
mod fit;
mod simulate;
mod tune;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate::cmd(a).map(|()| 0),
        Command::Tune(a) => tune::cmd(a),
        Command::Fit(a) => fit::cmd(a).map(|()| 0),
        Command::Eval(a) => eval::cmd(a).map(|()| 0),
        Command::Compare(a) => compare::cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
