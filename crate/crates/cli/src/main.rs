use std::process::ExitCode;

use clap::Parser;
use tsc_cli::args::{Cli, Command};
use tsc_cli::{commands, exit_code, resolve_threads, EXIT_USAGE};

fn run(cli: &Cli) -> anyhow::Result<String> {
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Coreset(a) => commands::coreset(a),
        Command::Fit(a) => commands::fit(a),
        Command::Eval(a) => commands::eval(a),
        Command::Experiment(a) => commands::experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match resolve_threads(cli.threads, std::env::var("TSC_THREADS").ok().as_deref()) {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
