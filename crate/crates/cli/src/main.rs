//! `atlasbench` command-line entry point.

use atlasbench_cli::{init_threads, run, Cli};
use clap::Parser;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|_| run(&cli)) {
        eprintln!("atlasbench: {e}");
        std::process::exit(e.exit_code());
    }
}
