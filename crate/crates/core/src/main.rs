use std::process::ExitCode;

use clap::Parser;
use poisson_global_games::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
