mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, VizCommand};
use error::CliError;

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let argv = config::expand(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return Err(CliError::Usage(first.to_owned()));
        }
    };
    log::debug!("running {}", cli.command.name());
    match &cli.command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Viz(VizCommand::Pca(a)) => commands::viz_pca(a),
        Command::Viz(VizCommand::Tsne(a)) => commands::viz_tsne(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let argv: Result<Vec<String>, _> = std::env::args_os().map(|a| a.into_string()).collect();
    let result = match argv {
        Ok(argv) => run(argv),
        Err(bad) => Err(CliError::Usage(format!("argument is not valid UTF-8: {bad:?}"))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
