//! Desk-scale egress picking: every agent kind on the same generated instance.

use tomosplit::harness::{Experiment, ExperimentConfig};

fn main() -> tomosplit::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    for kind in ["equal-split", "fw-oracle", "corl-fw", "corl", "ddpg"] {
        let text = format!(
            "seed = 1\nsteps = {steps}\n[topology]\ngenerate = {{ nodes = 20, extra_edges = 20 }}\n\
             [traffic]\nutilization = 0.9\n[problem]\nkind = \"egress\"\negresses = 4\nprefixes = 8\n\
             [[agents]]\nkind = \"{kind}\"\ncorl = {{ tau = 0.01 }}\n"
        );
        let config = ExperimentConfig::parse(&text, "egress.toml".as_ref())?;
        let result = Experiment::build(config)?.run()?;
        let last = result.rows.last().unwrap();
        println!(
            "{kind:>12}: final moving-average delay {:.5} s, reduction {:>6.2}%",
            last.moving_averages[0],
            100.0 * (result.baselines[0] - last.moving_averages[0]) / result.baselines[0]
        );
    }
    Ok(())
}
