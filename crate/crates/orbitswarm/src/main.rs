use clap::Parser;

use orbitswarm::cli::{dispatch, Cli};

fn main() {
    // RUST_LOG controls diagnostic verbosity only; it never changes
    // simulation behavior or output files.
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    std::process::exit(dispatch(cli));
}
