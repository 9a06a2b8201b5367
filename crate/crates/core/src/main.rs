use std::process::ExitCode;

use clap::Parser;
use odefilter::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
