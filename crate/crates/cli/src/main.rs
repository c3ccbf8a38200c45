mod args;
mod commands;
mod manifest;

use clap::Parser;

use args::{Cli, Command};
use commands::Global;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_CONFIG } else { commands::EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let g = Global {
        jobs: cli.jobs.max(1),
        no_plots: cli.no_plots,
    };
    let result = match &cli.command {
        Command::Hartree(run) => commands::hartree(run, &g),
        Command::Nbody(run) => commands::nbody(run, &g),
        Command::Converge { run, which, dry_run } => commands::converge(run, *which, *dry_run, &g),
        Command::Check { run, only } => commands::check(run, only, &g),
    };
    let code = match result {
        Ok(c) => c,
        Err(f) => {
            eprintln!("magmf: {}", f.message);
            f.code
        }
    };
    std::process::exit(code);
}
