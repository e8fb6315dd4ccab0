use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentKind, CorlConfig, DdpgConfig};
use crate::env::{EgressProblem, Problem, SegmentProblem};
use crate::error::{Error, Result};
use crate::netsim::{DelayModel, Network, NodeId, RandomTopology, Topology};
use crate::traffic::{TrafficMatrix, DEFAULT_STD_FRACTION};

/// One experiment run, read from a TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub steps: usize,
    /// CSV destination, relative to the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Adds a per-step wall-clock column; such CSVs are not reproducible.
    #[serde(default)]
    pub wall_clock: bool,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub traffic: TrafficConfig,
    pub problem: ProblemConfig,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub failures: Vec<FailureConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub path: Option<PathBuf>,
    pub generate: Option<RandomTopology>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Mean of the exponential gravity weights.
    pub rate: f64,
    pub std_fraction: f64,
    /// Scale traffic so plain ECMP routing of the mean matrix peaks at this utilization.
    pub utilization: Option<f64>,
    /// Replay a traffic-matrix series file instead of the gravity model (cycled).
    pub series: Option<PathBuf>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            rate: 1.0,
            std_fraction: DEFAULT_STD_FRACTION,
            utilization: None,
            series: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Egress,
    Segment,
}

/// Node roles. Explicit node lists take precedence; otherwise the counts
/// are filled by sampling unused nodes without replacement.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub egresses: Option<usize>,
    #[serde(default)]
    pub egress_nodes: Vec<NodeId>,
    pub prefixes: Option<usize>,
    #[serde(default)]
    pub prefix_nodes: Vec<NodeId>,
    pub sources: Option<usize>,
    #[serde(default)]
    pub source_nodes: Vec<NodeId>,
    pub destinations: Option<usize>,
    #[serde(default)]
    pub destination_nodes: Vec<NodeId>,
    /// Random middle candidates added to the sources.
    #[serde(default)]
    pub extra_middles: usize,
    /// Replaces the sampled middle candidates entirely.
    #[serde(default)]
    pub middle_nodes: Vec<NodeId>,
}

impl ProblemConfig {
    pub fn egress(egresses: usize, prefixes: usize) -> Self {
        Self {
            kind: ProblemKind::Egress,
            egresses: Some(egresses),
            prefixes: Some(prefixes),
            ..Self::empty(ProblemKind::Egress)
        }
    }

    pub fn segment(sources: usize, destinations: usize, extra_middles: usize) -> Self {
        Self {
            sources: Some(sources),
            destinations: Some(destinations),
            extra_middles,
            ..Self::empty(ProblemKind::Segment)
        }
    }

    pub fn empty(kind: ProblemKind) -> Self {
        Self {
            kind,
            egresses: None,
            egress_nodes: Vec::new(),
            prefixes: None,
            prefix_nodes: Vec::new(),
            sources: None,
            source_nodes: Vec::new(),
            destinations: None,
            destination_nodes: Vec::new(),
            extra_middles: 0,
            middle_nodes: Vec::new(),
        }
    }
}

/// Optional hyperparameter overrides for learning agents.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorlOverrides {
    pub n_candidates: Option<usize>,
    pub opt_iters: Option<usize>,
    pub action_lr: Option<f64>,
    pub net_lr: Option<f64>,
    pub minibatch: Option<usize>,
    pub tau: Option<f64>,
    pub buffer_capacity: Option<usize>,
    pub hidden: Option<Vec<usize>>,
}

impl CorlOverrides {
    pub fn apply(&self, mut c: CorlConfig) -> CorlConfig {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(n_candidates, opt_iters, action_lr, net_lr, minibatch, tau, buffer_capacity, hidden);
        c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Gives this agent its own problem; otherwise it shares the top-level one.
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub corl: CorlOverrides,
    #[serde(default)]
    pub ddpg: Option<DdpgConfig>,
}

impl AgentConfig {
    pub fn new(kind: AgentKind) -> Self {
        Self {
            kind,
            problem: None,
            corl: CorlOverrides::default(),
            ddpg: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureAction {
    #[default]
    DropRandomLink,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureConfig {
    /// Applied before this step's evaluation.
    pub step: usize,
    #[serde(default)]
    pub action: FailureAction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Delay model the oracle differentiates; its actions are always scored on the real one.
    pub model: DelayModel,
    pub max_iters: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            model: DelayModel::Smoothed,
            max_iters: 100,
        }
    }
}

pub(crate) mod streams {
    pub const TOPOLOGY: u64 = 1;
    pub const GRAVITY: u64 = 2;
    pub const ROLES: u64 = 3;
    pub const PERTURB: u64 = 4;
    pub const FAILURE: u64 = 5;
    pub const AGENTS: u64 = 1000;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent sub-seed for one component of a run.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(origin, line, e.message().to_string())
        })?;
        config.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        config.check()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// `path` resolved against the directory of the config file.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Static checks that need no topology.
    pub fn check(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("no [[agents]] configured".into()));
        }
        match (&self.topology.path, &self.topology.generate) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Config("[topology] needs exactly one of `path` or `generate`".into())),
        }
        if let Some(f) = self.failures.iter().find(|f| f.step >= self.steps) {
            return Err(Error::Config(format!("failure at step {} is past the last step", f.step)));
        }
        let t = &self.traffic;
        if !(t.rate > 0.0 && (0.0..1.0).contains(&t.std_fraction)) {
            return Err(Error::Config("traffic rate must be positive and std_fraction in [0, 1)".into()));
        }
        if self.oracle.max_iters == 0 {
            return Err(Error::Config("oracle.max_iters must be positive".into()));
        }
        for a in &self.agents {
            if let Some(d) = &a.ddpg {
                d.validate()?;
            }
        }
        Ok(())
    }

    pub fn build_topology(&self) -> Result<Topology> {
        match (&self.topology.path, &self.topology.generate) {
            (Some(p), _) => Topology::load(self.resolve(p)),
            (None, Some(g)) => g.generate(derive_seed(self.seed, streams::TOPOLOGY)),
            (None, None) => Err(Error::Config("no topology".into())),
        }
    }
}

struct RolePicker {
    free: Vec<NodeId>,
    n: usize,
}

impl RolePicker {
    fn new(n: usize, explicit: &[&[NodeId]], seed: u64) -> Result<Self> {
        let mut taken = vec![false; n];
        for &v in explicit.iter().flat_map(|l| l.iter()) {
            if v >= n {
                return Err(Error::Config(format!("node {v} is not in the {n}-node topology")));
            }
            taken[v] = true;
        }
        let mut free: Vec<NodeId> = (0..n).filter(|v| !taken[*v]).collect();
        free.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { free, n })
    }

    fn pick(&mut self, role: &str, explicit: &[NodeId], count: Option<usize>) -> Result<Vec<NodeId>> {
        if !explicit.is_empty() {
            return Ok(explicit.to_vec());
        }
        let count = count.ok_or_else(|| Error::Config(format!("problem needs `{role}s` or `{role}_nodes`")))?;
        if count > self.free.len() {
            return Err(Error::Config(format!(
                "cannot place {count} {role} nodes: only {} of {} nodes left",
                self.free.len(),
                self.n
            )));
        }
        let rest = self.free.split_off(count);
        Ok(std::mem::replace(&mut self.free, rest))
    }
}

/// Samples node roles for `config` and builds the problem.
pub fn build_problem(config: &ProblemConfig, network: &Network, mean_tm: &TrafficMatrix, seed: u64) -> Result<Problem> {
    let n = network.topology().n_nodes();
    match config.kind {
        ProblemKind::Egress => {
            let mut picker = RolePicker::new(n, &[&config.egress_nodes, &config.prefix_nodes], seed)?;
            let egresses = picker.pick("egress", &config.egress_nodes, config.egresses)?;
            let prefixes = picker.pick("prefix", &config.prefix_nodes, config.prefixes)?;
            Ok(EgressProblem::new(network, egresses, prefixes, mean_tm)?.into())
        }
        ProblemKind::Segment => {
            let mut picker = RolePicker::new(
                n,
                &[&config.source_nodes, &config.destination_nodes, &config.middle_nodes],
                seed,
            )?;
            let sources = picker.pick("source", &config.source_nodes, config.sources)?;
            let destinations = picker.pick("destination", &config.destination_nodes, config.destinations)?;
            let middles = if config.middle_nodes.is_empty() {
                let mut m = sources.clone();
                m.extend(picker.pick("middle", &[], Some(config.extra_middles))?);
                m
            } else {
                config.middle_nodes.clone()
            };
            Ok(SegmentProblem::new(network, sources, destinations, middles, mean_tm)?.into())
        }
    }
}
