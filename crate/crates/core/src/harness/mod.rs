//! Experiment orchestration: builds the network, traffic and problems from a
//! config, steps every agent through time and records per-step metrics.

mod config;
mod metrics;

use std::time::Instant;

pub use config::{
    build_problem, derive_seed, AgentConfig, CorlOverrides, ExperimentConfig, FailureAction, FailureConfig,
    OracleConfig, ProblemConfig, ProblemKind, TopologyConfig, TrafficConfig,
};
pub use metrics::{
    aggregate, format_summary, reduction, summarize, summarize_csv, KindSummary, MetricsRow, MovingAverage,
    RunResult, RunSummary, MOVING_AVERAGE_WINDOW, SETTLED_FRACTION,
};

use config::streams;

use crate::agents::{
    fw_oracle_action, ActionSearch, AgentKind, CorlAgent, CorlConfig, DdpgAgent, DdpgConfig, Transition,
};
use crate::env::{system_cost, JointOutcome, JointStep, Problem, SplitAction};
use crate::error::{Error, Result};
use crate::fw::FwConfig;
use crate::netsim::{Link, Network};
use crate::traffic::{
    gravity_mean_tm, load_tm_series, max_utilization, perturb_tm, sample_gravity_params, GravityParams,
    TrafficMatrix,
};

/// Where each step's traffic matrix comes from.
#[derive(Debug, Clone)]
pub enum TrafficSource {
    Gravity { params: GravityParams, seed: u64 },
    Series(Vec<TrafficMatrix>),
}

impl TrafficSource {
    pub fn at(&self, step: usize) -> TrafficMatrix {
        match self {
            TrafficSource::Gravity { params, seed } => perturb_tm(params, *seed, step),
            TrafficSource::Series(s) => s[step % s.len()].clone(),
        }
    }

    pub fn mean(&self) -> TrafficMatrix {
        match self {
            TrafficSource::Gravity { params, .. } => gravity_mean_tm(params),
            TrafficSource::Series(s) => {
                let n = s[0].n();
                let mut sum = vec![0.0; n * n];
                for tm in s {
                    for (acc, v) in sum.iter_mut().zip(tm.as_slice()) {
                        *acc += v;
                    }
                }
                let len = s.len() as f64;
                TrafficMatrix::from_vec(n, sum.into_iter().map(|v| v / len).collect()).expect("mean of valid matrices")
            }
        }
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            TrafficSource::Gravity { params, seed } => TrafficSource::Gravity {
                params: params.scaled(factor),
                seed,
            },
            TrafficSource::Series(s) => TrafficSource::Series(s.iter().map(|tm| tm.scaled(factor)).collect()),
        }
    }
}

/// Everything one step exposes to an observer.
#[derive(Debug)]
pub struct StepView<'a> {
    pub step: usize,
    pub network: &'a Network,
    pub problems: &'a [Problem],
    pub tm: &'a TrafficMatrix,
    pub actions: &'a [SplitAction],
    pub outcome: &'a JointOutcome,
    /// Links removed by a failure at this step.
    pub dropped: &'a [Link],
    pub row: &'a MetricsRow,
}

#[derive(Debug)]
enum Controller {
    Corl(Box<CorlAgent>),
    Ddpg(Box<DdpgAgent>),
    EqualSplit,
    FwOracle,
}

/// A built experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    network: Network,
    traffic: TrafficSource,
    mean_tm: TrafficMatrix,
    problems: Vec<Problem>,
}

impl Experiment {
    pub fn build(config: ExperimentConfig) -> Result<Self> {
        config.check()?;
        let network = Network::new(config.build_topology()?);
        let n = network.topology().n_nodes();
        let traffic = match &config.traffic.series {
            Some(path) => {
                let series = load_tm_series(config.resolve(path))?;
                if series.is_empty() {
                    return Err(Error::Config("traffic series is empty".into()));
                }
                if series[0].n() != n {
                    return Err(Error::Dimension { expected: n, got: series[0].n() });
                }
                TrafficSource::Series(series)
            }
            None => {
                let sampled = sample_gravity_params(n, config.traffic.rate, derive_seed(config.seed, streams::GRAVITY))?;
                let params = GravityParams::new(sampled.p_in, sampled.p_out, config.traffic.std_fraction)?;
                TrafficSource::Gravity {
                    params,
                    seed: derive_seed(config.seed, streams::PERTURB),
                }
            }
        };
        let traffic = match config.traffic.utilization {
            Some(target) => {
                let current = max_utilization(&traffic.mean(), &network)?;
                if !(target > 0.0) || current <= 0.0 {
                    return Err(Error::Scaling(format!(
                        "cannot scale utilization {current} to {target}"
                    )));
                }
                traffic.scaled(target / current)
            }
            None => traffic,
        };
        let mean_tm = traffic.mean();
        let roles = derive_seed(config.seed, streams::ROLES);
        let shared = build_problem(&config.problem, &network, &mean_tm, roles)?;
        let problems = config
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| match &a.problem {
                Some(p) => build_problem(p, &network, &mean_tm, derive_seed(roles, i as u64 + 1)),
                None => Ok(shared.clone()),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(format!("building problems: {e}")))?;
        Ok(Self {
            config,
            network,
            traffic,
            mean_tm,
            problems,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn problems(&self) -> &[Problem] {
        &self.problems
    }

    pub fn traffic(&self) -> &TrafficSource {
        &self.traffic
    }

    pub fn mean_tm(&self) -> &TrafficMatrix {
        &self.mean_tm
    }

    /// Column labels `<kind>_<index>`.
    pub fn labels(&self) -> Vec<String> {
        self.config
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{}_{i}", a.kind))
            .collect()
    }

    fn controllers(&self) -> Result<Vec<Controller>> {
        let agent_seed = derive_seed(self.config.seed, streams::AGENTS);
        self.config
            .agents
            .iter()
            .zip(&self.problems)
            .enumerate()
            .map(|(i, (a, p))| {
                let seed = derive_seed(agent_seed, i as u64);
                let space = p.space().clone();
                let hidden = match p {
                    Problem::Egress(_) => vec![256, 256],
                    Problem::Segment(_) => vec![512, 256],
                };
                let corl = |search| {
                    let base = CorlConfig {
                        hidden: hidden.clone(),
                        ..CorlConfig::for_search(search)
                    };
                    CorlAgent::new(space.clone(), p.state_dim(), search, a.corl.apply(base), seed)
                };
                let agent_err = |e: Error| Error::Agent { agent: i, source: Box::new(e) };
                Ok(match a.kind {
                    AgentKind::Corl => Controller::Corl(Box::new(corl(ActionSearch::Softmax).map_err(agent_err)?)),
                    AgentKind::CorlFw => Controller::Corl(Box::new(corl(ActionSearch::FrankWolfe).map_err(agent_err)?)),
                    AgentKind::Ddpg => {
                        let config = a.ddpg.clone().unwrap_or_else(|| DdpgConfig {
                            actor_hidden: hidden.clone(),
                            critic_hidden: hidden.clone(),
                            ..DdpgConfig::default()
                        });
                        Controller::Ddpg(Box::new(DdpgAgent::new(space, p.state_dim(), config, seed).map_err(agent_err)?))
                    }
                    AgentKind::EqualSplit => Controller::EqualSplit,
                    AgentKind::FwOracle => Controller::FwOracle,
                })
            })
            .collect()
    }

    pub fn run(&self) -> Result<RunResult> {
        self.run_with(|_| Ok(()))
    }

    /// Runs every step, calling `observer` after each joint evaluation.
    pub fn run_with<F>(&self, mut observer: F) -> Result<RunResult>
    where
        F: FnMut(&StepView) -> Result<()>,
    {
        let cfg = &self.config;
        let mut controllers = self.controllers()?;
        let mut network = self.network.clone();
        let equal: Vec<SplitAction> = self.problems.iter().map(Problem::equal_split).collect();
        let mut previous = equal.clone();
        let mut averages = vec![MovingAverage::default(); self.problems.len()];
        let mut system_average = MovingAverage::default();
        let mut baselines = Vec::new();
        let mut system_baseline = 0.0;
        let mut rows = Vec::with_capacity(cfg.steps);
        let failure_seed = derive_seed(cfg.seed, streams::FAILURE);
        let fw = FwConfig::with_max_iters(cfg.oracle.max_iters);

        for t in 0..cfg.steps {
            let wrap = |e: Error| Error::Step { step: t, source: Box::new(e) };
            let started = Instant::now();
            let mut dropped = Vec::new();
            for f in cfg.failures.iter().filter(|f| f.step == t) {
                match f.action {
                    FailureAction::DropRandomLink => {
                        let (next, links) = network
                            .fail_random_link(derive_seed(failure_seed, t as u64))
                            .map_err(wrap)?;
                        network = next;
                        dropped.extend(links);
                    }
                }
            }
            let tm = self.traffic.at(t);
            let step = JointStep::new(&network, &self.problems, &tm).map_err(wrap)?;
            if t == 0 {
                let base = step.evaluate(&equal).map_err(wrap)?;
                baselines = base.observations.iter().map(|o| o.mean_cost).collect();
                system_baseline = system_cost(&base.observations);
            }

            let states: Vec<Vec<f64>> = (0..self.problems.len()).map(|a| step.state(a)).collect();
            let mut actions = Vec::with_capacity(controllers.len());
            for (a, c) in controllers.iter_mut().enumerate() {
                let agent_err = |e: Error| wrap(Error::Agent { agent: a, source: Box::new(e) });
                let action = match c {
                    Controller::Corl(agent) => agent.select_action(&states[a]).map_err(agent_err)?,
                    Controller::Ddpg(agent) => agent.act(&states[a]).map_err(agent_err)?,
                    Controller::EqualSplit => equal[a].clone(),
                    Controller::FwOracle => {
                        let base = step.loads_excluding(Some(a), &previous);
                        let objective = |x: &[f64]| Ok(step.agent_cost(a, x, &base, cfg.oracle.model));
                        fw_oracle_action(objective, self.problems[a].space(), &fw)
                            .map_err(agent_err)?
                            .action
                    }
                };
                actions.push(action);
            }

            let outcome = step.evaluate(&actions).map_err(wrap)?;
            for (a, c) in controllers.iter_mut().enumerate() {
                let cost = outcome.observations[a].mean_cost;
                let learn = match c {
                    Controller::Corl(agent) => Some(Transition::new(states[a].clone(), actions[a].clone(), cost).and_then(|tr| agent.learn(tr))),
                    Controller::Ddpg(agent) => Some(Transition::new(states[a].clone(), actions[a].clone(), cost).and_then(|tr| agent.learn(tr))),
                    _ => None,
                };
                if let Some(Err(e)) = learn {
                    return Err(wrap(Error::Agent { agent: a, source: Box::new(e) }));
                }
            }

            let costs: Vec<f64> = outcome.observations.iter().map(|o| o.mean_cost).collect();
            let system = system_cost(&outcome.observations);
            let row = MetricsRow {
                step: t,
                moving_averages: costs.iter().zip(&mut averages).map(|(c, m)| m.push(*c)).collect(),
                reductions: costs.iter().zip(&baselines).map(|(c, b)| reduction(*b, *c)).collect(),
                costs,
                system_cost: system,
                system_moving_average: system_average.push(system),
                system_reduction: reduction(system_baseline, system),
                wall_clock: cfg.wall_clock.then(|| started.elapsed().as_secs_f64()),
            };
            observer(&StepView {
                step: t,
                network: &network,
                problems: &self.problems,
                tm: &tm,
                actions: &actions,
                outcome: &outcome,
                dropped: &dropped,
                row: &row,
            })
            .map_err(wrap)?;
            rows.push(row);
            previous = actions;
        }
        Ok(RunResult {
            labels: self.labels(),
            baselines,
            system_baseline,
            rows,
        })
    }

    /// The first `steps` traffic matrices this experiment would use.
    pub fn tm_series(&self, steps: usize) -> Vec<TrafficMatrix> {
        (0..steps).map(|t| self.traffic.at(t)).collect()
    }

    /// Human-readable description of the built instance.
    pub fn describe(&self) -> String {
        let topo = self.network.topology();
        let util = max_utilization(&self.mean_tm, &self.network).unwrap_or(f64::NAN);
        let mut out = format!(
            "topology: {} nodes, {} links\nmean traffic: total {:.4}, plain ECMP max utilization {:.4}\nsteps: {}, seed: {}\n",
            topo.n_nodes(),
            topo.n_links(),
            self.mean_tm.total(),
            util,
            self.config.steps,
            self.config.seed
        );
        for (label, p) in self.labels().iter().zip(&self.problems) {
            let kind = match p {
                Problem::Egress(e) => format!("egress picking, {} egresses x {} prefixes", e.egresses().len(), e.prefixes().len()),
                Problem::Segment(s) => format!(
                    "segment routing, {} pairs, {} middle candidates",
                    s.pairs().len(),
                    s.middles().len()
                ),
            };
            out.push_str(&format!("{label}: {kind}, action dimension {}\n", p.space().dim()));
        }
        out
    }
}

/// Builds and runs `config`, writing the CSV to `config.output` when set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    let result = Experiment::build(config.clone())?.run()?;
    if let Some(out) = &config.output {
        result.write_csv(&config.resolve(out))?;
    }
    Ok(result)
}

/// Dry run: builds topology, traffic and problems without stepping.
pub fn validate(config: &ExperimentConfig) -> Result<String> {
    Ok(Experiment::build(config.clone())?.describe())
}
