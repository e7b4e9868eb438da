use clap::Parser;
use flat_tiler::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
