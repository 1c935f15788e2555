use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "geomech", version, about = "Run geometric-mechanics scenarios and report invariant drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one or more scenario files.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Number of scenarios to run in parallel.
        #[arg(long, short, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the registered systems, their parameters and invariants.
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            print!("{}", geomech_cli::list_systems());
            ExitCode::SUCCESS
        }
        Command::Run { configs, jobs } => {
            let mut code = 0;
            for (path, result) in configs.iter().zip(geomech_cli::run_files(&configs, jobs)) {
                match result {
                    Ok(r) => println!(
                        "{}: {} ok in {:.3} s -> {}",
                        path.display(),
                        r.system,
                        r.wall_time_seconds,
                        r.trajectory_path.display()
                    ),
                    Err(e) => {
                        eprintln!("geomech: {}: {e}", path.display());
                        code = code.max(e.exit_code());
                    }
                }
            }
            ExitCode::from(code as u8)
        }
    }
}
