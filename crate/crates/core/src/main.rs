use clap::Parser;

use rsac::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
