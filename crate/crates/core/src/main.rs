use clap::Parser;

use ramsey_beats::cli::{hint, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        if let Some(h) = hint(&err) {
            eprintln!("hint: {h}");
        }
        std::process::exit(err.exit_code());
    }
}
