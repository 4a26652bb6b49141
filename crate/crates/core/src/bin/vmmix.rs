use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;
use vmmix::cli::{emit, error_json, execute, Cli};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            eprintln!("{}", error_json("usage", &e.kind().to_string()));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let config = match cli.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match execute(&config).and_then(|env| emit(&env)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
