use std::process::ExitCode;

use clap::Parser;
use impulsive_iss::cli::{run, Cli};

fn main() -> ExitCode {
    run(&Cli::parse()).into()
}
