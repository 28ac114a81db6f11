use clap::Parser;
use saferoute::cli::{is_usage_error, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err:#}");
        std::process::exit(if is_usage_error(&err) { 2 } else { 1 });
    }
}
