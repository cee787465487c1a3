use std::process::ExitCode;

use clap::Parser;

use bs_spectra::cli::{apply_thread_env, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = apply_thread_env() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
