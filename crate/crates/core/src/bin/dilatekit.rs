use clap::Parser;
use dilatekit::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DILATEKIT_LOG", "warn")).init();
    let cli = Cli::parse();
    std::process::exit(run(&cli));
}
