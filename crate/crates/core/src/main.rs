use clap::Parser;

use merton_bayes::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            std::process::exit(outcome.code);
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.code);
        }
    }
}
