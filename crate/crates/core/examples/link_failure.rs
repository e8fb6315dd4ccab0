//! A link fails halfway through a CORL-FW run; the moving average shows the
//! jump and the recovery.

use tomosplit::harness::{Experiment, ExperimentConfig};

fn main() -> tomosplit::Result<()> {
    let text = "seed = 1\nsteps = 1000\n[topology]\ngenerate = { nodes = 20, extra_edges = 20 }\n\
                [traffic]\nutilization = 0.9\n[problem]\nkind = \"egress\"\negresses = 4\nprefixes = 8\n\
                [[agents]]\nkind = \"corl-fw\"\ncorl = { tau = 0.01 }\n[[failures]]\nstep = 500\n";
    let exp = Experiment::build(ExperimentConfig::parse(text, "failure.toml".as_ref())?)?;
    let result = exp.run_with(|v| {
        for l in v.dropped {
            println!("step {}: link {}-{} fails, {} links remain", v.step, l.src, l.dst, v.network.n_links());
        }
        Ok(())
    })?;
    for row in result.rows.iter().skip(400).step_by(50) {
        println!("step {:>4}: cost {:.5}, moving average {:.5}", row.step, row.costs[0], row.moving_averages[0]);
    }
    Ok(())
}
