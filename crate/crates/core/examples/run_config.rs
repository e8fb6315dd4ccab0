//! Runs a TOML experiment file and prints the summary, like `tomosplit run`
//! followed by `tomosplit summarize`.
//!
//!     cargo run --release --example run_config -- configs/egress.toml

use std::path::PathBuf;

use tomosplit::harness::{aggregate, format_summary, run_experiment, summarize_csv, ExperimentConfig};

fn main() -> tomosplit::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "configs/egress.toml".into());
    let config = ExperimentConfig::load(&path)?;
    let result = run_experiment(&config)?;
    let runs = summarize_csv(&result.to_csv()?, &path)?;
    print!("{}", format_summary(&aggregate(&runs)));
    Ok(())
}
