use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tomosplit::harness::{format_summary, run_experiment, summarize, validate, Experiment, ExperimentConfig};
use tomosplit::traffic::write_tm_series;
use tomosplit::Error;

#[derive(Parser)]
#[command(version, about = "Traffic splitting over networks observed only through delays")]
struct Cli {
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV.
    Run {
        config: PathBuf,
        /// CSV path; defaults to the config's `output`, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the traffic-matrix series an experiment config would use.
    GenTm {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of matrices; defaults to the config's step count.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Summarize run CSVs per agent kind.
    Summarize {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
    /// Check a config and describe the instance it builds.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => load(&config, cli.seed).and_then(|mut c| {
            let to_stdout = out.is_none() && c.output.is_none();
            if let Some(o) = out {
                c.output = Some(std::env::current_dir()?.join(o));
            }
            let result = run_experiment(&c)?;
            if to_stdout {
                print!("{}", result.to_csv()?);
            }
            Ok(())
        }),
        Command::GenTm { config, out, steps } => load(&config, cli.seed).and_then(|c| {
            let steps = steps.unwrap_or(c.steps);
            write_tm_series(&out, &Experiment::build(c)?.tm_series(steps))
        }),
        Command::Summarize { csv } => summarize(&csv).map(|rows| print!("{}", format_summary(&rows))),
        Command::Validate { config } => load(&config, cli.seed).and_then(|c| validate(&c)).map(|s| print!("{s}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code())
        }
    }
}
