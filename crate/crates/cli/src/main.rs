use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cohthermo_cli::check::run_checks;
use cohthermo_cli::config::RunConfig;
use cohthermo_cli::runner::run;
use cohthermo_cli::CliError;

#[derive(Parser)]
#[command(name = "cohthermo", version, about = "Entropy production, coherence and fluctuation theorems in driven quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory, overriding the `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant suite.
    Check,
}

fn run_command(config: PathBuf, workers: Option<usize>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut config = RunConfig::load(&config)?;
    if let Some(w) = workers {
        config.set_workers(w);
    }
    if let Some(o) = out {
        config.set_output(o);
    }
    let summary = run(&config)?;
    let warnings = summary
        .manifest
        .points
        .iter()
        .filter(|p| p.status != cohthermo_cli::runner::Status::Ok)
        .count();
    println!(
        "{}: {} point(s), {} warning(s), output in {}",
        summary.manifest.experiment,
        summary.manifest.points.len(),
        warnings,
        summary.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            workers,
            out,
        } => match run_command(config, workers, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Check => {
            let results = run_checks();
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", r.name, r.detail);
            }
            if results.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
    }
}
