use std::process::ExitCode;

use clap::Parser;
use rectilab::cli::{error_json, exit_code, run, Cli};
use rectilab::Error;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            let error = Error::Config(format!("--threads: {e}"));
            eprintln!("{}", error_json(&error));
            return ExitCode::from(exit_code(&error) as u8);
        }
    }
    match run(cli.command, &cli.global) {
        Ok(artifacts) => {
            for path in artifacts {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(error) => {
            eprintln!("{}", error_json(&error));
            ExitCode::from(exit_code(&error) as u8)
        }
    }
}
