//! The two traffic-splitting environments (egress picking and two-segment
//! segment routing) and their joint multi-agent evaluation.
//!
//! An environment turns a split decision and the current traffic matrix into
//! link loads on the hidden [`Network`] and reports back only end-to-end
//! delays, the way an external prober would see them.

mod space;

use std::collections::{BTreeSet, HashMap};

pub use space::{BlockSimplexSpace, SplitAction, FEASIBILITY_TOLERANCE};

use crate::error::{Error, Result};
use crate::netsim::{DelayModel, LinkLoadMap, Network, NodeId};
use crate::traffic::TrafficMatrix;

/// A destination prefix and its mean demand `t_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prefix {
    pub id: usize,
    pub destination: NodeId,
    pub demand: f64,
}

/// Which traffic-matrix entries feed each block, and which network segments
/// each coordinate routes its share over.
#[derive(Debug, Clone)]
struct Layout {
    space: BlockSimplexSpace,
    block_entries: Vec<Vec<(NodeId, NodeId)>>,
    segments: Vec<(NodeId, NodeId)>,
    coord_segments: Vec<Vec<usize>>,
    normalization: f64,
}

impl Layout {
    fn build(
        network: &Network,
        block_entries: Vec<Vec<(NodeId, NodeId)>>,
        coord_routes: Vec<Vec<Vec<(NodeId, NodeId)>>>,
        mean_tm: &TrafficMatrix,
    ) -> Result<Self> {
        let n = network.topology().n_nodes();
        if mean_tm.n() != n {
            return Err(Error::Dimension {
                expected: n,
                got: mean_tm.n(),
            });
        }
        let space = BlockSimplexSpace::new(coord_routes.iter().map(Vec::len).collect())?;
        let distinct: BTreeSet<(NodeId, NodeId)> =
            coord_routes.iter().flatten().flatten().copied().collect();
        for &(a, b) in &distinct {
            network.link_shares(a, b)?;
        }
        let segments: Vec<_> = distinct.into_iter().collect();
        let index: HashMap<_, _> = segments.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let coord_segments = coord_routes
            .into_iter()
            .flatten()
            .map(|route| route.iter().map(|s| index[s]).collect())
            .collect();
        let mut layout = Self {
            space,
            block_entries,
            segments,
            coord_segments,
            normalization: 1.0,
        };
        let peak = layout.block_demands(mean_tm).into_iter().fold(0.0, f64::max);
        if peak > 0.0 {
            layout.normalization = peak;
        }
        Ok(layout)
    }

    fn block_demands(&self, tm: &TrafficMatrix) -> Vec<f64> {
        self.block_entries
            .iter()
            .map(|entries| entries.iter().map(|&(i, j)| tm.get(i, j)).sum())
            .collect()
    }
}

fn check_nodes(network: &Network, role: &str, nodes: &[NodeId]) -> Result<()> {
    let n = network.topology().n_nodes();
    let mut seen = BTreeSet::new();
    for &v in nodes {
        if v >= n {
            return Err(Error::Config(format!("{role} node {v} is not in the topology")));
        }
        if !seen.insert(v) {
            return Err(Error::Config(format!("{role} node {v} listed twice")));
        }
    }
    if nodes.is_empty() {
        return Err(Error::Config(format!("no {role} nodes")));
    }
    Ok(())
}

/// Splitting the traffic of each destination prefix over `m` egress points.
///
/// Block `i` holds `alpha_i1 .. alpha_im`. The traffic of prefix `i` in a time
/// step is the matrix demand from all egresses towards its destination.
#[derive(Debug, Clone)]
pub struct EgressProblem {
    prefixes: Vec<Prefix>,
    egresses: Vec<NodeId>,
    layout: Layout,
}

impl EgressProblem {
    pub fn new(
        network: &Network,
        egresses: Vec<NodeId>,
        destinations: Vec<NodeId>,
        mean_tm: &TrafficMatrix,
    ) -> Result<Self> {
        check_nodes(network, "egress", &egresses)?;
        check_nodes(network, "destination", &destinations)?;
        if let Some(v) = destinations.iter().find(|d| egresses.contains(d)) {
            return Err(Error::Config(format!("node {v} is both egress and destination")));
        }
        let block_entries = destinations
            .iter()
            .map(|&d| egresses.iter().map(|&e| (e, d)).collect())
            .collect();
        let coord_routes = destinations
            .iter()
            .map(|&d| egresses.iter().map(|&e| vec![(e, d)]).collect())
            .collect();
        let layout = Layout::build(network, block_entries, coord_routes, mean_tm)?;
        let prefixes = destinations
            .iter()
            .zip(layout.block_demands(mean_tm))
            .enumerate()
            .map(|(id, (&destination, demand))| Prefix {
                id,
                destination,
                demand,
            })
            .collect();
        Ok(Self {
            prefixes,
            egresses,
            layout,
        })
    }

    pub fn prefixes(&self) -> &[Prefix] {
        &self.prefixes
    }

    pub fn egresses(&self) -> &[NodeId] {
        &self.egresses
    }

    pub fn space(&self) -> &BlockSimplexSpace {
        &self.layout.space
    }
}

/// Routing each source-destination pair directly or through one middle node.
///
/// Block `(i, j)` lists its candidates with the destination itself first,
/// which encodes the direct single-segment route `beta_ijj`.
#[derive(Debug, Clone)]
pub struct SegmentProblem {
    sources: Vec<NodeId>,
    destinations: Vec<NodeId>,
    middles: Vec<NodeId>,
    pairs: Vec<(NodeId, NodeId)>,
    candidates: Vec<Vec<NodeId>>,
    layout: Layout,
}

impl SegmentProblem {
    pub fn new(
        network: &Network,
        sources: Vec<NodeId>,
        destinations: Vec<NodeId>,
        middles: Vec<NodeId>,
        mean_tm: &TrafficMatrix,
    ) -> Result<Self> {
        check_nodes(network, "source", &sources)?;
        check_nodes(network, "destination", &destinations)?;
        if !middles.is_empty() {
            check_nodes(network, "middle", &middles)?;
        }
        let mut pairs = Vec::new();
        let mut candidates = Vec::new();
        for &i in &sources {
            for &j in &destinations {
                if i == j {
                    continue;
                }
                pairs.push((i, j));
                let mut c = vec![j];
                c.extend(middles.iter().copied().filter(|&k| k != i && k != j));
                candidates.push(c);
            }
        }
        if pairs.is_empty() {
            return Err(Error::Config("segment problem has no source-destination pair".into()));
        }
        let block_entries = pairs.iter().map(|&p| vec![p]).collect();
        let coord_routes = pairs
            .iter()
            .zip(&candidates)
            .map(|(&(i, j), cands)| {
                cands
                    .iter()
                    .map(|&k| if k == j { vec![(i, j)] } else { vec![(i, k), (k, j)] })
                    .collect()
            })
            .collect();
        let layout = Layout::build(network, block_entries, coord_routes, mean_tm)?;
        Ok(Self {
            sources,
            destinations,
            middles,
            pairs,
            candidates,
            layout,
        })
    }

    pub fn sources(&self) -> &[NodeId] {
        &self.sources
    }

    pub fn destinations(&self) -> &[NodeId] {
        &self.destinations
    }

    pub fn middles(&self) -> &[NodeId] {
        &self.middles
    }

    /// Source-destination pair of each block.
    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    /// Candidate middle nodes per block; element 0 is the destination (direct route).
    pub fn candidates(&self) -> &[Vec<NodeId>] {
        &self.candidates
    }

    pub fn space(&self) -> &BlockSimplexSpace {
        &self.layout.space
    }

    /// The action that sends every pair over its direct route.
    pub fn all_direct(&self) -> SplitAction {
        let mut values = vec![0.0; self.layout.space.dim()];
        for b in 0..self.layout.space.n_blocks() {
            values[self.layout.space.block_range(b).start] = 1.0;
        }
        SplitAction::from_vec_unchecked(values)
    }
}

#[derive(Debug, Clone)]
pub enum Problem {
    Egress(EgressProblem),
    Segment(SegmentProblem),
}

impl From<EgressProblem> for Problem {
    fn from(p: EgressProblem) -> Self {
        Problem::Egress(p)
    }
}

impl From<SegmentProblem> for Problem {
    fn from(p: SegmentProblem) -> Self {
        Problem::Segment(p)
    }
}

impl Problem {
    fn layout(&self) -> &Layout {
        match self {
            Problem::Egress(p) => &p.layout,
            Problem::Segment(p) => &p.layout,
        }
    }

    pub fn space(&self) -> &BlockSimplexSpace {
        &self.layout().space
    }

    /// Length of the state vector: one demand per block.
    pub fn state_dim(&self) -> usize {
        self.layout().space.n_blocks()
    }

    /// Divisor applied to demands in the state vector.
    pub fn normalization(&self) -> f64 {
        self.layout().normalization
    }

    /// Traffic-matrix entries whose demand this problem controls.
    pub fn controlled_entries(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.layout().block_entries.iter().flatten().copied()
    }

    /// Distinct segments any coordinate routes over, sorted.
    pub fn segments(&self) -> &[(NodeId, NodeId)] {
        &self.layout().segments
    }

    /// Segments traversed by coordinate `coord`.
    pub fn coordinate_segments(&self, coord: usize) -> Vec<(NodeId, NodeId)> {
        let layout = self.layout();
        layout.coord_segments[coord]
            .iter()
            .map(|&s| layout.segments[s])
            .collect()
    }

    /// Demand of every block in `tm` when no other agent claims the same entries.
    pub fn block_demands(&self, tm: &TrafficMatrix) -> Vec<f64> {
        self.layout().block_demands(tm)
    }

    pub fn equal_split(&self) -> SplitAction {
        self.space().equal_split()
    }
}

/// Demand vector of `tm` as seen by `problem`, divided by the problem's
/// normalization constant; ordered by block.
pub fn state_vector(problem: &Problem, tm: &TrafficMatrix) -> Vec<f64> {
    let norm = problem.normalization();
    problem.block_demands(tm).into_iter().map(|d| d / norm).collect()
}

/// What one agent observes after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Normalized demand vector `s_t`.
    pub state: Vec<f64>,
    /// Demand of each block in traffic units.
    pub block_demands: Vec<f64>,
    /// Per block, the end-to-end delay of every coordinate's route
    /// (`D_ij` for egress picking, `D_ikj` for segment routing).
    pub measured_delays: Vec<Vec<f64>>,
    /// Delay of every distinct segment used by the problem (`Delta_ik`).
    pub segment_delays: Vec<((NodeId, NodeId), f64)>,
    /// Demand-weighted mean delay `c_t`, seconds.
    pub mean_cost: f64,
}

impl Observation {
    pub fn total_demand(&self) -> f64 {
        self.block_demands.iter().sum()
    }

    /// Mean cost of `action` under the delays recorded in this observation.
    pub fn cost_of(&self, action: &SplitAction) -> f64 {
        weighted_cost(&self.block_demands, &self.measured_delays, action.values())
    }

    pub fn segment_delay(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.segment_delays
            .iter()
            .find(|(s, _)| *s == (src, dst))
            .map(|&(_, d)| d)
    }
}

fn weighted_cost(demands: &[f64], delays: &[Vec<f64>], action: &[f64]) -> f64 {
    let total: f64 = demands.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut offset = 0;
    let mut acc = 0.0;
    for (w, row) in demands.iter().zip(delays) {
        let block = &action[offset..offset + row.len()];
        acc += w * row.iter().zip(block).map(|(d, a)| d * a).sum::<f64>();
        offset += row.len();
    }
    acc / total
}

/// Demand-weighted mean cost over several agents' observations.
pub fn system_cost(observations: &[Observation]) -> f64 {
    let total: f64 = observations.iter().map(Observation::total_demand).sum();
    if total <= 0.0 {
        return 0.0;
    }
    observations
        .iter()
        .map(|o| o.total_demand() * o.mean_cost)
        .sum::<f64>()
        / total
}

/// Result of a joint evaluation.
#[derive(Debug, Clone)]
pub struct JointOutcome {
    pub observations: Vec<Observation>,
    pub loads: LinkLoadMap,
}

/// One time step of a shared network: the traffic matrix split into the
/// agents' controlled demands and the background traffic nobody controls.
///
/// An entry claimed by several agents is divided evenly among them.
#[derive(Debug)]
pub struct JointStep<'a> {
    network: &'a Network,
    problems: &'a [Problem],
    demands: Vec<Vec<f64>>,
    background: Vec<f64>,
}

impl<'a> JointStep<'a> {
    pub fn new(network: &'a Network, problems: &'a [Problem], tm: &TrafficMatrix) -> Result<Self> {
        let n = network.topology().n_nodes();
        if tm.n() != n {
            return Err(Error::Dimension {
                expected: n,
                got: tm.n(),
            });
        }
        let mut claims = vec![0usize; n * n];
        for p in problems {
            for (i, j) in p.controlled_entries() {
                claims[i * n + j] += 1;
            }
        }
        let demands = problems
            .iter()
            .map(|p| {
                p.layout()
                    .block_entries
                    .iter()
                    .map(|entries| {
                        entries
                            .iter()
                            .map(|&(i, j)| tm.get(i, j) / claims[i * n + j] as f64)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let mut background = vec![0.0; network.n_links()];
        for (i, j, d) in tm.demands() {
            if claims[i * n + j] == 0 {
                network.add_flow(&mut background, i, j, d)?;
            }
        }
        Ok(Self {
            network,
            problems,
            demands,
            background,
        })
    }

    pub fn network(&self) -> &Network {
        self.network
    }

    pub fn block_demands(&self, agent: usize) -> &[f64] {
        &self.demands[agent]
    }

    /// Normalized state vector of `agent` for this step.
    pub fn state(&self, agent: usize) -> Vec<f64> {
        let norm = self.problems[agent].normalization();
        self.demands[agent].iter().map(|d| d / norm).collect()
    }

    /// Link loads of the uncontrolled traffic.
    pub fn background_loads(&self) -> &[f64] {
        &self.background
    }

    /// Adds the traffic `agent` routes under `action` to `loads`.
    pub fn add_agent_loads(&self, agent: usize, action: &[f64], loads: &mut [f64]) {
        let problem = &self.problems[agent];
        let layout = problem.layout();
        for b in 0..layout.space.n_blocks() {
            let demand = self.demands[agent][b];
            if demand == 0.0 {
                continue;
            }
            for c in layout.space.block_range(b) {
                let amount = demand * action[c];
                if amount == 0.0 {
                    continue;
                }
                for &s in &layout.coord_segments[c] {
                    let (i, j) = layout.segments[s];
                    for &(l, share) in self.network.link_shares(i, j).expect("validated segment") {
                        loads[l] += amount * share;
                    }
                }
            }
        }
    }

    /// Background plus every agent except `skip` routing its given action.
    pub fn loads_excluding(&self, skip: Option<usize>, actions: &[SplitAction]) -> Vec<f64> {
        let mut loads = self.background.clone();
        for (a, action) in actions.iter().enumerate() {
            if Some(a) != skip {
                self.add_agent_loads(a, action.values(), &mut loads);
            }
        }
        loads
    }

    fn observe(&self, agent: usize, action: &[f64], link_delays: &[f64]) -> Observation {
        let layout = self.problems[agent].layout();
        let seg_delay: Vec<f64> = layout
            .segments
            .iter()
            .map(|&(i, j)| {
                self.network
                    .pair_delay(i, j, link_delays)
                    .expect("validated segment")
            })
            .collect();
        let measured_delays: Vec<Vec<f64>> = (0..layout.space.n_blocks())
            .map(|b| {
                layout
                    .space
                    .block_range(b)
                    .map(|c| layout.coord_segments[c].iter().map(|&s| seg_delay[s]).sum())
                    .collect()
            })
            .collect();
        let block_demands = self.demands[agent].clone();
        let mean_cost = weighted_cost(&block_demands, &measured_delays, action);
        Observation {
            state: self.state(agent),
            block_demands,
            measured_delays,
            segment_delays: layout.segments.iter().copied().zip(seg_delay).collect(),
            mean_cost,
        }
    }

    /// Mean cost of `agent` playing `action` on top of `base_loads`, under
    /// `model`. No feasibility check; used for finite-difference probing.
    pub fn agent_cost(&self, agent: usize, action: &[f64], base_loads: &[f64], model: DelayModel) -> f64 {
        let mut loads = base_loads.to_vec();
        self.add_agent_loads(agent, action, &mut loads);
        let delays = self.network.link_delays(&loads, model);
        self.observe(agent, action, &delays).mean_cost
    }

    fn evaluate_unwrapped(&self, actions: &[SplitAction]) -> Result<JointOutcome, (usize, Error)> {
        if actions.len() != self.problems.len() {
            return Err((
                0,
                Error::Dimension {
                    expected: self.problems.len(),
                    got: actions.len(),
                },
            ));
        }
        for (a, (p, action)) in self.problems.iter().zip(actions).enumerate() {
            p.space().validate(action.values()).map_err(|e| (a, e))?;
        }
        let loads = self.loads_excluding(None, actions);
        let delays = self.network.link_delays(&loads, DelayModel::Queueing);
        let observations = actions
            .iter()
            .enumerate()
            .map(|(a, action)| self.observe(a, action.values(), &delays))
            .collect();
        Ok(JointOutcome {
            observations,
            loads: LinkLoadMap::from_vec(loads),
        })
    }

    /// Routes every agent's action together with the background and measures
    /// each agent's delays under the joint load.
    pub fn evaluate(&self, actions: &[SplitAction]) -> Result<JointOutcome> {
        self.evaluate_unwrapped(actions).map_err(|(agent, e)| Error::Agent {
            agent,
            source: Box::new(e),
        })
    }
}

fn evaluate_single(network: &Network, problem: Problem, action: &SplitAction, tm: &TrafficMatrix) -> Result<Observation> {
    let problems = [problem];
    let step = JointStep::new(network, &problems, tm)?;
    let mut outcome = step
        .evaluate_unwrapped(std::slice::from_ref(action))
        .map_err(|(_, e)| e)?;
    Ok(outcome.observations.remove(0))
}

/// Egress picking: routes background and prefix traffic split by `action`,
/// returns `D_ij` for every prefix and egress and the mean delay.
pub fn egress_evaluate(
    network: &Network,
    problem: &EgressProblem,
    action: &SplitAction,
    tm: &TrafficMatrix,
) -> Result<Observation> {
    evaluate_single(network, problem.clone().into(), action, tm)
}

/// Segment routing: `D_ikj = Delta_ik + Delta_kj` (or `Delta_ij` for the direct route).
pub fn segment_evaluate(
    network: &Network,
    problem: &SegmentProblem,
    action: &SplitAction,
    tm: &TrafficMatrix,
) -> Result<Observation> {
    evaluate_single(network, problem.clone().into(), action, tm)
}

/// Joint evaluation of several agents sharing the network.
pub fn multi_agent_evaluate(
    network: &Network,
    problems: &[Problem],
    actions: &[SplitAction],
    tm: &TrafficMatrix,
) -> Result<Vec<Observation>> {
    Ok(JointStep::new(network, problems, tm)?
        .evaluate(actions)?
        .observations)
}
