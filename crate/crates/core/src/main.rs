use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "hloc", version, about = "Weighted local Hardy space experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json and cases.csv.
    Run {
        /// JSON experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Rerun on the refined grid and check stability.
        #[arg(long)]
        refine: bool,
    },
    /// List the registered experiment ids.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            refine,
        } => {
            let code = hloc::harness::run_cli(&config, out.as_deref(), seed, refine);
            ExitCode::from(code as u8)
        }
        Command::List => {
            for id in hloc::ExperimentId::ALL {
                println!("{id}");
            }
            ExitCode::SUCCESS
        }
    }
}
