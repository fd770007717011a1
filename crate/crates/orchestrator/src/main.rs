use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use sliceorch::cli::{self, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match (&cli.command, cli.serve.serve) {
        (Some(Command::Run(args)), _) => cli::run_command(args),
        (None, Some(addr)) => tokio::runtime::Runtime::new()
            .expect("tokio runtime")
            .block_on(cli::serve(&cli.serve, addr)),
        (None, None) => {
            let _ = Cli::command().print_help();
            cli::EXIT_SCENARIO
        }
    };
    ExitCode::from(code)
}
