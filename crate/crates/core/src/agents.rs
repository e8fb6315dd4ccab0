//! Decision makers: critic-only agents (CORL, CORL-FW), the DDPG baseline,
//! the static equal split and the full-information Frank-Wolfe oracle.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{BlockSimplexSpace, SplitAction};
use crate::error::{Error, Result};
use crate::fw::{fw_solve, random_feasible_with, softmax_blocks, softmax_blocks_backward, FwConfig, FwOutcome};
use crate::neural::{AdamState, Mlp, TargetPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Corl,
    CorlFw,
    Ddpg,
    EqualSplit,
    FwOracle,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Corl => "corl",
            AgentKind::CorlFw => "corl-fw",
            AgentKind::Ddpg => "ddpg",
            AgentKind::EqualSplit => "equal-split",
            AgentKind::FwOracle => "fw-oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            AgentKind::Corl,
            AgentKind::CorlFw,
            AgentKind::Ddpg,
            AgentKind::EqualSplit,
            AgentKind::FwOracle,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One step of experience `(s_t, a_t, c_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: SplitAction,
    pub cost: f64,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: SplitAction, cost: f64) -> Result<Self> {
        if !(cost.is_finite() && cost >= 0.0) {
            return Err(Error::Config(format!("transition cost {cost} is not a delay")));
        }
        Ok(Self { state, action, cost })
    }

    fn input(&self) -> Vec<f64> {
        let mut x = self.state.clone();
        x.extend_from_slice(self.action.values());
        x
    }
}

/// FIFO buffer of recent transitions, sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.max(1)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn sample(&mut self, m: usize) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        let n = self.items.len();
        let picks: Vec<usize> = (0..m).map(|_| self.rng.random_range(0..n)).collect();
        picks.into_iter().map(|i| &self.items[i]).collect()
    }
}

fn critic_step(
    critic: &mut TargetPair,
    adam: &mut AdamState,
    batch: &[(Vec<f64>, f64)],
) -> Result<f64> {
    let (loss, grad) = critic.live.grad_params(batch)?;
    adam.step(critic.live.params_mut(), &grad)?;
    critic.soft_update()?;
    Ok(loss)
}

/// Critics regress `cost / reference`, where the reference is the first
/// positive cost an agent observes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostScale {
    pub reference: Option<f64>,
}

impl CostScale {
    fn observe(&mut self, cost: f64) {
        if self.reference.is_none() && cost > 0.0 {
            self.reference = Some(cost);
        }
    }

    pub fn normalize(&self, cost: f64) -> f64 {
        cost / self.reference.unwrap_or(1.0)
    }

    pub fn denormalize(&self, q: f64) -> f64 {
        q * self.reference.unwrap_or(1.0)
    }
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

/// How a critic-only agent turns its critic into an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSearch {
    /// Adam on softmax logits.
    Softmax,
    /// Frank-Wolfe on the polytope.
    FrankWolfe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorlConfig {
    pub n_candidates: usize,
    pub opt_iters: usize,
    pub action_lr: f64,
    pub net_lr: f64,
    pub minibatch: usize,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
}

impl Default for CorlConfig {
    fn default() -> Self {
        Self {
            n_candidates: 1000,
            opt_iters: 100,
            action_lr: 0.05,
            net_lr: 0.001,
            minibatch: 32,
            tau: 0.001,
            buffer_capacity: 1000,
            hidden: vec![256, 256],
        }
    }
}

impl CorlConfig {
    pub fn for_search(search: ActionSearch) -> Self {
        match search {
            ActionSearch::Softmax => Self::default(),
            ActionSearch::FrankWolfe => Self {
                opt_iters: 10,
                ..Self::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_candidates", self.n_candidates),
            ("minibatch", self.minibatch),
            ("buffer_capacity", self.buffer_capacity),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.action_lr > 0.0 && self.net_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer of size 0".into()));
        }
        Ok(())
    }
}

/// Critic-only agent: learns `Q(s, a)` predicting the mean delay and picks
/// actions by minimizing the target critic over the action polytope.
#[derive(Debug, Clone)]
pub struct CorlAgent {
    space: BlockSimplexSpace,
    state_dim: usize,
    search: ActionSearch,
    config: CorlConfig,
    critic: TargetPair,
    adam: AdamState,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    scale: CostScale,
    steps: u64,
}

impl CorlAgent {
    pub fn new(
        space: BlockSimplexSpace,
        state_dim: usize,
        search: ActionSearch,
        config: CorlConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = layer_sizes(state_dim + space.dim(), &config.hidden, 1);
        let live = Mlp::new(&sizes, &mut rng)?;
        let buffer = ReplayBuffer::new(config.buffer_capacity, rng.random());
        Ok(Self {
            adam: AdamState::new(live.params().len(), config.net_lr),
            critic: TargetPair::new(live, config.tau),
            space,
            state_dim,
            search,
            config,
            buffer,
            rng,
            scale: CostScale::default(),
            steps: 0,
        })
    }

    pub fn search(&self) -> ActionSearch {
        self.search
    }

    pub fn space(&self) -> &BlockSimplexSpace {
        &self.space
    }

    pub fn config(&self) -> &CorlConfig {
        &self.config
    }

    pub fn critic(&self) -> &TargetPair {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut TargetPair {
        &mut self.critic
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn input(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        x
    }

    pub fn cost_scale(&self) -> CostScale {
        self.scale
    }

    /// Live-critic cost estimate, seconds.
    pub fn predict(&self, state: &[f64], action: &SplitAction) -> Result<f64> {
        let q = self.critic.live.forward_scalar(&self.input(state, action.values()))?;
        Ok(self.scale.denormalize(q))
    }

    // Index of the candidate with the lowest target-critic estimate.
    fn best_candidate(&self, state: &[f64], candidates: &[Vec<f64>]) -> Result<usize> {
        let mut batch = Vec::with_capacity(candidates.len() * (state.len() + self.space.dim()));
        for c in candidates {
            batch.extend_from_slice(state);
            batch.extend_from_slice(c);
        }
        let q = self.critic.target.forward_batch(&batch)?;
        let mut best = 0;
        for (i, v) in q.iter().enumerate() {
            if *v < q[best] {
                best = i;
            }
        }
        Ok(best)
    }

    fn action_gradient(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let x = self.input(state, action);
        self.critic.target.grad_input(&x, self.state_dim..x.len())
    }

    pub fn select_action(&mut self, state: &[f64]) -> Result<SplitAction> {
        if state.len() != self.state_dim {
            return Err(Error::Dimension {
                expected: self.state_dim,
                got: state.len(),
            });
        }
        match self.search {
            ActionSearch::Softmax => self.select_softmax(state),
            ActionSearch::FrankWolfe => Ok(self.select_frank_wolfe(state)?.action),
        }
    }

    fn select_softmax(&mut self, state: &[f64]) -> Result<SplitAction> {
        let dim = self.space.dim();
        // Softmax of iid log-exponential logits is uniform on each simplex.
        let logits: Vec<Vec<f64>> = (0..self.config.n_candidates)
            .map(|_| (0..dim).map(|_| self.rng.sample::<f64, _>(Exp1).ln()).collect())
            .collect();
        let candidates = logits
            .iter()
            .map(|v| softmax_blocks(v, &self.space).map(SplitAction::into_vec))
            .collect::<Result<Vec<_>>>()?;
        let best = self.best_candidate(state, &candidates)?;
        let mut v = logits[best].clone();
        let mut adam = AdamState::new(dim, self.config.action_lr);
        for _ in 0..self.config.opt_iters {
            let a = softmax_blocks(&v, &self.space)?;
            let g = self.action_gradient(state, a.values())?;
            let dv = softmax_blocks_backward(a.values(), &g, &self.space);
            adam.step(&mut v, &dv)?;
        }
        softmax_blocks(&v, &self.space)
    }

    /// Frank-Wolfe search from the best random feasible candidate.
    pub fn select_frank_wolfe(&mut self, state: &[f64]) -> Result<FwOutcome> {
        let candidates: Vec<Vec<f64>> = random_feasible_with(&self.space, &mut self.rng, self.config.n_candidates)
            .into_iter()
            .map(SplitAction::into_vec)
            .collect();
        let best = self.best_candidate(state, &candidates)?;
        let start = SplitAction::from_vec_unchecked(candidates[best].clone());
        let config = FwConfig::with_max_iters(self.config.opt_iters.max(1));
        fw_solve(|x| self.action_gradient(state, x.values()), &self.space, &config, start)
    }

    /// Stores the transition, fits the live critic on one minibatch and
    /// moves the target; returns the minibatch loss before the step.
    pub fn learn(&mut self, transition: Transition) -> Result<f64> {
        self.scale.observe(transition.cost);
        self.buffer.push(transition);
        let scale = self.scale;
        let batch: Vec<(Vec<f64>, f64)> = self
            .buffer
            .sample(self.config.minibatch)
            .into_iter()
            .map(|t| (t.input(), scale.normalize(t.cost)))
            .collect();
        self.steps += 1;
        critic_step(&mut self.critic, &mut self.adam, &batch)
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.critic.live.save(&dir.join("critic.mlp"))?;
        self.critic.target.save(&dir.join("critic_target.mlp"))?;
        let meta = CheckpointMeta {
            kind: match self.search {
                ActionSearch::Softmax => AgentKind::Corl,
                ActionSearch::FrankWolfe => AgentKind::CorlFw,
            },
            steps: self.steps,
            cost_scale: self.scale,
            state_dim: self.state_dim,
            block_sizes: self.space.block_sizes().to_vec(),
            corl: Some(self.config.clone()),
            ddpg: None,
        };
        meta.save(dir)
    }

    /// Restores networks and hyperparameters; optimizer moments and the
    /// replay buffer start empty.
    pub fn load_checkpoint(dir: &Path, seed: u64) -> Result<Self> {
        let meta = CheckpointMeta::load(dir)?;
        let search = match meta.kind {
            AgentKind::Corl => ActionSearch::Softmax,
            AgentKind::CorlFw => ActionSearch::FrankWolfe,
            k => return Err(Error::Config(format!("checkpoint holds a {k} agent"))),
        };
        let config = meta.corl.ok_or_else(|| Error::Config("checkpoint lacks [corl]".into()))?;
        let space = BlockSimplexSpace::new(meta.block_sizes)?;
        let mut agent = Self::new(space, meta.state_dim, search, config, seed)?;
        agent.critic.live = load_matching(&dir.join("critic.mlp"), &agent.critic.live)?;
        agent.critic.target = load_matching(&dir.join("critic_target.mlp"), &agent.critic.target)?;
        agent.steps = meta.steps;
        agent.scale = meta.cost_scale;
        Ok(agent)
    }
}

fn load_matching(path: &Path, like: &Mlp) -> Result<Mlp> {
    let net = Mlp::load(path)?;
    if !net.same_architecture(like) {
        return Err(Error::Config(format!(
            "{}: layers {:?}, expected {:?}",
            path.display(),
            net.sizes(),
            like.sizes()
        )));
    }
    Ok(net)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointMeta {
    kind: AgentKind,
    steps: u64,
    #[serde(default)]
    cost_scale: CostScale,
    state_dim: usize,
    block_sizes: Vec<usize>,
    corl: Option<CorlConfig>,
    ddpg: Option<DdpgConfig>,
}

impl CheckpointMeta {
    fn save(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("meta.toml"), text)?;
        Ok(())
    }

    fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("meta.toml");
        toml::from_str(&fs::read_to_string(&path)?).map_err(|e| Error::parse(&path, 0, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub minibatch: usize,
    pub tau: f64,
    pub buffer_capacity: usize,
    /// Standard deviation of the Gaussian logit noise at step 0.
    pub noise: f64,
    pub noise_decay: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            actor_lr: 0.001,
            critic_lr: 0.001,
            minibatch: 32,
            tau: 0.001,
            buffer_capacity: 1000,
            noise: 0.1,
            noise_decay: 0.999,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minibatch == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("minibatch and buffer_capacity must be positive".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) || !(0.0..=1.0).contains(&self.noise_decay) || self.noise < 0.0 {
            return Err(Error::Config("tau, noise and noise_decay out of range".into()));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::Config("hidden layer of size 0".into()));
        }
        Ok(())
    }
}

/// Actor-critic baseline: the actor maps states to logits, a per-block
/// softmax turns them into a split.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    space: BlockSimplexSpace,
    state_dim: usize,
    config: DdpgConfig,
    actor: TargetPair,
    critic: TargetPair,
    actor_adam: AdamState,
    critic_adam: AdamState,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    noise: f64,
    scale: CostScale,
    steps: u64,
}

impl DdpgAgent {
    pub fn new(space: BlockSimplexSpace, state_dim: usize, config: DdpgConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Mlp::new(&layer_sizes(state_dim, &config.actor_hidden, space.dim()), &mut rng)?;
        let critic = Mlp::new(&layer_sizes(state_dim + space.dim(), &config.critic_hidden, 1), &mut rng)?;
        let buffer = ReplayBuffer::new(config.buffer_capacity, rng.random());
        Ok(Self {
            actor_adam: AdamState::new(actor.params().len(), config.actor_lr),
            critic_adam: AdamState::new(critic.params().len(), config.critic_lr),
            actor: TargetPair::new(actor, config.tau),
            critic: TargetPair::new(critic, config.tau),
            noise: config.noise,
            space,
            state_dim,
            config,
            buffer,
            rng,
            scale: CostScale::default(),
            steps: 0,
        })
    }

    pub fn actor(&self) -> &TargetPair {
        &self.actor
    }

    pub fn critic(&self) -> &TargetPair {
        &self.critic
    }

    pub fn critic_mut(&mut self) -> &mut TargetPair {
        &mut self.critic
    }

    /// Current exploration noise scale.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn set_noise(&mut self, sigma: f64) {
        self.noise = sigma;
    }

    /// Actor output without exploration.
    pub fn policy(&self, state: &[f64]) -> Result<SplitAction> {
        softmax_blocks(&self.actor.live.forward(state)?, &self.space)
    }

    /// Policy action with Gaussian noise on the logits; the noise then decays.
    pub fn act(&mut self, state: &[f64]) -> Result<SplitAction> {
        let mut logits = self.actor.live.forward(state)?;
        if self.noise > 0.0 {
            for v in &mut logits {
                *v += self.noise * self.rng.sample::<f64, _>(StandardNormal);
            }
        }
        self.noise *= self.config.noise_decay;
        softmax_blocks(&logits, &self.space)
    }

    pub fn update_critic(&mut self, batch: &[(Vec<f64>, f64)]) -> Result<f64> {
        let (loss, grad) = self.critic.live.grad_params(batch)?;
        self.critic_adam.step(self.critic.live.params_mut(), &grad)?;
        Ok(loss)
    }

    /// One actor step lowering the live critic's estimate at the actor's own actions.
    pub fn update_actor(&mut self, states: &[Vec<f64>]) -> Result<()> {
        if states.is_empty() {
            return Ok(());
        }
        let dim = self.space.dim();
        let flat: Vec<f64> = states.iter().flatten().copied().collect();
        let actor_trace = self.actor.live.forward_trace(&flat)?;
        let mut critic_in = Vec::with_capacity(states.len() * (self.state_dim + dim));
        let mut probs = Vec::with_capacity(states.len());
        for (s, logits) in states.iter().zip(actor_trace.output().chunks_exact(dim)) {
            let a = softmax_blocks(logits, &self.space)?;
            critic_in.extend_from_slice(s);
            critic_in.extend_from_slice(a.values());
            probs.push(a);
        }
        let critic_trace = self.critic.live.forward_trace(&critic_in)?;
        let (_, input_grad) = self.critic.live.backward(&critic_trace, &vec![1.0; states.len()], true)?;
        let input_grad = input_grad.unwrap();
        let m = states.len() as f64;
        let width = self.state_dim + dim;
        let mut out_grad = Vec::with_capacity(states.len() * dim);
        for (row, a) in input_grad.chunks_exact(width).zip(&probs) {
            let dv = softmax_blocks_backward(a.values(), &row[self.state_dim..], &self.space);
            out_grad.extend(dv.into_iter().map(|g| g / m));
        }
        let (grad, _) = self.actor.live.backward(&actor_trace, &out_grad, false)?;
        self.actor_adam.step(self.actor.live.params_mut(), &grad)
    }

    /// Critic step, actor step, then soft updates of both targets.
    pub fn learn(&mut self, transition: Transition) -> Result<f64> {
        self.scale.observe(transition.cost);
        self.buffer.push(transition);
        let sample: Vec<Transition> = self
            .buffer
            .sample(self.config.minibatch)
            .into_iter()
            .cloned()
            .collect();
        let batch: Vec<(Vec<f64>, f64)> = sample
            .iter()
            .map(|t| (t.input(), self.scale.normalize(t.cost)))
            .collect();
        let loss = self.update_critic(&batch)?;
        let states: Vec<Vec<f64>> = sample.into_iter().map(|t| t.state).collect();
        self.update_actor(&states)?;
        self.critic.soft_update()?;
        self.actor.soft_update()?;
        self.steps += 1;
        Ok(loss)
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.actor.live.save(&dir.join("actor.mlp"))?;
        self.actor.target.save(&dir.join("actor_target.mlp"))?;
        self.critic.live.save(&dir.join("critic.mlp"))?;
        self.critic.target.save(&dir.join("critic_target.mlp"))?;
        CheckpointMeta {
            kind: AgentKind::Ddpg,
            steps: self.steps,
            cost_scale: self.scale,
            state_dim: self.state_dim,
            block_sizes: self.space.block_sizes().to_vec(),
            corl: None,
            ddpg: Some(self.config.clone()),
        }
        .save(dir)
    }

    pub fn load_checkpoint(dir: &Path, seed: u64) -> Result<Self> {
        let meta = CheckpointMeta::load(dir)?;
        if meta.kind != AgentKind::Ddpg {
            return Err(Error::Config(format!("checkpoint holds a {} agent", meta.kind)));
        }
        let config = meta.ddpg.ok_or_else(|| Error::Config("checkpoint lacks [ddpg]".into()))?;
        let mut agent = Self::new(BlockSimplexSpace::new(meta.block_sizes)?, meta.state_dim, config, seed)?;
        agent.actor.live = load_matching(&dir.join("actor.mlp"), &agent.actor.live)?;
        agent.actor.target = load_matching(&dir.join("actor_target.mlp"), &agent.actor.target)?;
        agent.critic.live = load_matching(&dir.join("critic.mlp"), &agent.critic.live)?;
        agent.critic.target = load_matching(&dir.join("critic_target.mlp"), &agent.critic.target)?;
        agent.steps = meta.steps;
        agent.scale = meta.cost_scale;
        Ok(agent)
    }
}

/// Every block split uniformly.
pub fn equal_split(space: &BlockSimplexSpace) -> SplitAction {
    space.equal_split()
}

/// Finite-difference step of the oracle gradient.
pub const ORACLE_FD_STEP: f64 = 1e-4;

/// Gradient of `objective` by finite differences, projected onto each
/// block's tangent space (block mean removed). Coordinates closer than `h`
/// to zero use a forward difference so no split goes negative.
pub fn fd_gradient<F>(objective: &mut F, x: &[f64], space: &BlockSimplexSpace, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = x.to_vec();
    let mut g = vec![0.0; x.len()];
    let base = if x.iter().any(|v| *v < h) { Some(objective(x)?) } else { None };
    for c in 0..x.len() {
        probe[c] = x[c] + h;
        let up = objective(&probe)?;
        if x[c] >= h {
            probe[c] = x[c] - h;
            g[c] = (up - objective(&probe)?) / (2.0 * h);
        } else {
            g[c] = (up - base.unwrap()) / h;
        }
        probe[c] = x[c];
    }
    for b in 0..space.n_blocks() {
        let range = space.block_range(b);
        let mean = g[range.clone()].iter().sum::<f64>() / range.len() as f64;
        for v in &mut g[range] {
            *v -= mean;
        }
    }
    Ok(g)
}

/// Full-information Frank-Wolfe on the true objective, started from the equal split.
pub fn fw_oracle_action<F>(mut objective: F, space: &BlockSimplexSpace, config: &FwConfig) -> Result<FwOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    fw_solve(
        |x| fd_gradient(&mut objective, x.values(), space, ORACLE_FD_STEP),
        space,
        config,
        space.equal_split(),
    )
}
