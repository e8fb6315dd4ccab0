mod common;

use std::path::Path;

use common::*;
use tomosplit::harness::{
    summarize, summarize_csv, Experiment, ExperimentConfig, RunResult, MOVING_AVERAGE_WINDOW,
};
use tomosplit::env::{JointStep, Problem};
use tomosplit::traffic::write_tm_series;
use tomosplit::{Error, ErrorCategory};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, Path::new("inline.toml")).unwrap()
}

fn egress(kinds: &[&str], steps: usize, seed: u64) -> String {
    let mut s = format!(
        "seed = {seed}\nsteps = {steps}\n[topology]\ngenerate = {{ nodes = 12, extra_edges = 10 }}\n\
         [traffic]\nutilization = 0.8\n[problem]\nkind = \"egress\"\negresses = 3\nprefixes = 4\n"
    );
    for k in kinds {
        s.push_str(&format!("[[agents]]\nkind = \"{k}\"\ncorl = {{ n_candidates = 100, hidden = [32, 32] }}\n"));
    }
    s
}

fn run(text: &str) -> RunResult {
    Experiment::build(config(text)).unwrap().run().unwrap()
}

#[test]
fn parse_errors_carry_file_and_line() {
    let err = ExperimentConfig::parse("steps = 10\n\n[topology]\nbogus = 1\n", Path::new("x.toml")).unwrap_err();
    assert_eq!(err.category(), ErrorCategory::Config);
    match err {
        Error::Parse { path, line, .. } => {
            assert_eq!(path, Path::new("x.toml"));
            assert_eq!(line, 4);
        }
        other => panic!("{other}"),
    }
    assert!(ExperimentConfig::parse(&egress(&[], 10, 0), Path::new("y")).is_err());
}

#[test]
fn config_toml_round_trip() {
    let c = config(&(egress(&["corl-fw", "ddpg"], 40, 3) + "[[failures]]\nstep = 20\n[oracle]\nmodel = \"queueing\"\n"));
    let back = config(&c.to_toml().unwrap());
    assert_eq!(back.to_toml().unwrap(), c.to_toml().unwrap());
    assert_eq!(back.agents.len(), 2);
    assert_eq!(back.failures[0].step, 20);
}

#[test]
fn equal_split_stays_within_noise_band() {
    let r = run(&egress(&["equal-split"], 300, 4));
    assert_eq!(r.rows[0].costs[0], r.baselines[0]);
    for row in &r.rows {
        assert!(row.reductions[0].abs() < 0.02, "step {}: {}", row.step, row.reductions[0]);
    }
}

#[test]
fn four_agent_csv_shape() {
    let r = run(&egress(&["corl", "corl-fw", "ddpg", "fw-oracle"], 30, 5));
    let csv = r.to_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 31);
    assert_eq!(lines[0].split(',').count(), 1 + 3 * 4 + 3);
    assert!(lines[0].starts_with("step,corl_0_cost,corl-fw_1_cost,ddpg_2_cost,fw-oracle_3_cost,corl_0_ma"));
    assert!(lines[0].ends_with("system_cost,system_ma,system_reduction"));
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 16));
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let text = egress(&["corl-fw", "ddpg"], 40, 6);
    assert_eq!(run(&text).to_csv().unwrap(), run(&text).to_csv().unwrap());
    assert_ne!(run(&text).to_csv().unwrap(), run(&egress(&["corl-fw", "ddpg"], 40, 7)).to_csv().unwrap());
}

#[test]
fn moving_average_matches_trailing_window() {
    let r = run(&egress(&["fw-oracle"], 250, 8));
    let costs: Vec<f64> = r.rows.iter().map(|x| x.costs[0]).collect();
    for (t, row) in r.rows.iter().enumerate() {
        let lo = (t + 1).saturating_sub(MOVING_AVERAGE_WINDOW);
        let window = &costs[lo..=t];
        let ma = window.iter().sum::<f64>() / window.len() as f64;
        assert!((row.moving_averages[0] - ma).abs() < 1e-12);
    }
}

#[test]
fn failure_reroutes_over_the_surviving_links() {
    let exp = Experiment::build(config(&(egress(&["fw-oracle"], 60, 9) + "[[failures]]\nstep = 30\n"))).unwrap();
    let before = exp.network().n_links();
    let mut seen = Vec::new();
    exp.run_with(|v| {
        seen.push((v.step, v.network.n_links(), v.dropped.len()));
        assert!(loads_match(
            &expected_joint_loads(v.network.topology(), v.problems, v.tm, v.actions),
            v.outcome.loads.as_slice()
        ));
        Ok(())
    })
    .unwrap();
    for (t, links, dropped) in seen {
        assert_eq!(links, if t < 30 { before } else { before - 2 });
        assert_eq!(dropped, if t == 30 { 2 } else { 0 });
    }
}

#[test]
fn replayed_series_reproduces_the_gravity_run() {
    // Oracle and equal split do not read the state, so only the traffic matters.
    let dir = tempfile::tempdir().unwrap();
    let text = egress(&["fw-oracle", "equal-split"], 50, 10);
    let exp = Experiment::build(config(&text)).unwrap();
    write_tm_series(dir.path().join("tm.txt"), &exp.tm_series(50)).unwrap();
    let replay = text.replace("utilization = 0.8", "series = \"tm.txt\"");
    let path = write_file(dir.path(), "replay.toml", &replay);
    let a = exp.run().unwrap();
    let b = Experiment::build(ExperimentConfig::load(&path).unwrap()).unwrap().run().unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.costs, y.costs);
    }
}

#[test]
fn summary_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    let mut finals = Vec::new();
    for seed in 0..3 {
        let exp = Experiment::build(config(&egress(&["fw-oracle"], 220, 20 + seed))).unwrap();
        let r = exp.run().unwrap();
        let equal: Vec<_> = exp.problems().iter().map(Problem::equal_split).collect();
        let base = JointStep::new(exp.network(), exp.problems(), &exp.traffic().at(0))
            .unwrap()
            .evaluate(&equal)
            .unwrap()
            .observations[0]
            .mean_cost;
        let path = dir.path().join(format!("run{seed}.csv"));
        r.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        // Spreadsheet-style recomputation from the raw cost column.
        let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        let cost: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let ma: Vec<f64> = (0..cost.len())
            .map(|t| {
                let w = &cost[(t + 1).saturating_sub(100)..=t];
                w.iter().sum::<f64>() / w.len() as f64
            })
            .collect();
        let fin = *ma.last().unwrap();
        let red = cost[cost.len() - 100..].iter().map(|c| (base - c) / base).sum::<f64>();
        let settle = (0..ma.len()).find(|&t| ma[t..].iter().all(|m| (m - fin).abs() <= 0.05 * fin)).unwrap();

        let s = &summarize_csv(&text, &path).unwrap()[0];
        assert!((s.final_moving_average - fin).abs() < 1e-12);
        assert!((s.reduction_percent - red).abs() < 1e-9);
        assert_eq!(s.steps_to_settle, settle);
        finals.push(fin);
        paths.push(path);
    }
    let agg = summarize(&paths).unwrap();
    assert_eq!(agg.len(), 1);
    assert_eq!(agg[0].kind, "fw-oracle");
    assert_eq!(agg[0].samples, 3);
    let mean = finals.iter().sum::<f64>() / 3.0;
    let std = (finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!((agg[0].final_moving_average.0 - mean).abs() < 1e-12);
    assert!((agg[0].final_moving_average.1 - std).abs() < 1e-12);
}

#[test]
fn segment_problem_runs_from_fixture_files() {
    let dir = tempfile::tempdir().unwrap();
    write_file(dir.path(), "tri.topo", SEGMENT_FIXTURE);
    let text = "steps = 20\n[topology]\npath = \"tri.topo\"\n[problem]\nkind = \"segment\"\n\
                source_nodes = [0, 3]\ndestination_nodes = [1, 4]\nmiddle_nodes = [2]\n\
                [[agents]]\nkind = \"corl-fw\"\ncorl = { n_candidates = 50 }\n";
    let path = write_file(dir.path(), "seg.toml", text);
    let r = Experiment::build(ExperimentConfig::load(&path).unwrap()).unwrap().run().unwrap();
    assert_eq!(r.rows.len(), 20);
    assert!(r.rows.iter().all(|row| row.costs[0].is_finite() && row.costs[0] > 0.0));
}
