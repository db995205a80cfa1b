use clap::Parser;

use causal_neco::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
