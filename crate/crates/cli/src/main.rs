mod args;
mod commands;
mod config_file;

use clap::Parser;

use args::{Cli, Command};

fn run(cli: &Cli) -> Result<(), commands::CliError> {
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Discover(a) => commands::discover(a),
        Command::TuneBeta(a) => commands::tune_beta(a),
        Command::Validate(a) => commands::validate(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Stability(a) => commands::stability(a),
    }
}

fn main() {
    let argv = match config_file::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let cli = Cli::parse_from(argv);
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: cannot start {} worker threads: {e}", cli.jobs);
            std::process::exit(2);
        }
    }
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
