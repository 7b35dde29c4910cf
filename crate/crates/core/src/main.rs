use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = fpgc::cli::Cli::parse();
    if let Err(e) = fpgc::cli::init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match fpgc::cli::execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
