//! Segment routing around a saturated direct link.

use tomosplit::env::{segment_evaluate, SegmentProblem, SplitAction};
use tomosplit::harness::{Experiment, ExperimentConfig};
use tomosplit::netsim::{DelayModel, Network, Topology};
use tomosplit::traffic::TrafficMatrix;

const TOPOLOGY: &str = "0 1 10\n0 2 40\n2 1 40\n2 3 40\n3 4 40\n";

fn main() -> tomosplit::Result<()> {
    let net = Network::new(Topology::parse(TOPOLOGY, "triangle".as_ref())?);
    let mut tm = TrafficMatrix::zeros(5);
    tm.set(0, 1, 10.5);
    let problem = SegmentProblem::new(&net, vec![0], vec![1], vec![2], &tm)?;
    for split in [1.0, 0.9, 0.7, 0.5] {
        let action = SplitAction::new(problem.space(), vec![split, 1.0 - split])?;
        let obs = segment_evaluate(&net, &problem, &action, &tm)?;
        println!("direct share {split:.1}: mean delay {:.5} s", obs.mean_cost);
    }

    let dir = std::env::temp_dir().join("tomosplit-segment-example");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("triangle.topo"), TOPOLOGY)?;
    let config = "steps = 400\n[topology]\npath = \"triangle.topo\"\n[traffic]\nutilization = 1.05\n\
                  [problem]\nkind = \"segment\"\nsource_nodes = [0]\ndestination_nodes = [1]\nmiddle_nodes = [2]\n\
                  [[agents]]\nkind = \"corl-fw\"\ncorl = { tau = 0.01 }\n";
    let mut config = ExperimentConfig::parse(config, &dir.join("segment.toml"))?;
    config.oracle.model = DelayModel::Smoothed;
    let result = Experiment::build(config)?.run()?;
    println!("corl-fw after 400 steps: moving-average delay {:.5} s", result.final_moving_average(0));
    Ok(())
}
