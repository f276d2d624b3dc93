mod args;
mod config;
mod data_cmd;
mod run_cmd;
mod score_cmd;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => {
            let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
            config::resolve_run_settings(&args).and_then(|settings| runtime.block_on(run_cmd::run(settings)))
        }
        Command::Score(args) => score_cmd::score(&args),
        Command::Report(args) => score_cmd::report(&args),
        Command::GenSynthetic(args) => data_cmd::gen_synthetic(&args),
        Command::Validate(args) => data_cmd::validate(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
