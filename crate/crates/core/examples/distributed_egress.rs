//! Two CORL-FW agents sharing a bottleneck, trained jointly.

use tomosplit::harness::{Experiment, ExperimentConfig};

const TOPOLOGY: &str = "0 6 40\n2 6 40\n6 7 20\n7 4 40\n7 5 40\n1 4 15\n3 5 15\n";

fn main() -> tomosplit::Result<()> {
    let dir = std::env::temp_dir().join("tomosplit-distributed-example");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("bottleneck.topo"), TOPOLOGY)?;
    let text = "seed = 7\nsteps = 600\n[topology]\npath = \"bottleneck.topo\"\n[traffic]\nutilization = 0.9\n\
                [problem]\nkind = \"egress\"\negress_nodes = [0, 1]\nprefix_nodes = [4]\n\
                [[agents]]\nkind = \"corl-fw\"\ncorl = { tau = 0.01 }\n\
                [[agents]]\nkind = \"corl-fw\"\ncorl = { tau = 0.01 }\n\
                problem = { kind = \"egress\", egress_nodes = [2, 3], prefix_nodes = [5] }\n";
    let config = ExperimentConfig::parse(text, &dir.join("distributed.toml"))?;
    let result = Experiment::build(config)?.run()?;
    for row in result.rows.iter().step_by(100) {
        println!(
            "step {:>3}: agent MAs {:.5} {:.5}, system MA {:.5}",
            row.step, row.moving_averages[0], row.moving_averages[1], row.system_moving_average
        );
    }
    println!("system baseline (equal split, step 0): {:.5}", result.system_baseline);
    Ok(())
}
