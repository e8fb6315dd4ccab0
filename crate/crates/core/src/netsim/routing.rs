use std::collections::VecDeque;

use super::{DelayModel, Link, LinkId, LinkLoadMap, NodeId, Topology};
use crate::error::{Error, Result};

const UNREACHABLE: usize = usize::MAX;

/// One ECMP path and the fraction of the pair's traffic it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath {
    pub links: Vec<LinkId>,
    pub weight: f64,
}

/// All minimum-hop paths between two nodes with their ECMP weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub src: NodeId,
    pub dst: NodeId,
    pub paths: Vec<WeightedPath>,
}

impl PathSet {
    pub fn total_weight(&self) -> f64 {
        self.paths.iter().map(|p| p.weight).sum()
    }
}

/// Hop distance from every node to `dst`.
fn hops_to(topology: &Topology, dst: NodeId) -> Vec<usize> {
    let mut dist = vec![UNREACHABLE; topology.n_nodes()];
    dist[dst] = 0;
    let mut queue = VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        for &l in topology.in_links(v) {
            let u = topology.link(l).src;
            if dist[u] == UNREACHABLE {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

fn next_hops<'a>(
    topology: &'a Topology,
    dist: &'a [usize],
    u: NodeId,
) -> impl Iterator<Item = LinkId> + 'a {
    topology
        .out_links(u)
        .iter()
        .copied()
        .filter(move |&l| dist[topology.link(l).dst].wrapping_add(1) == dist[u])
}

fn check_pair(topology: &Topology, src: NodeId, dst: NodeId) -> Result<()> {
    let n = topology.n_nodes();
    if src >= n || dst >= n {
        return Err(Error::Topology(format!(
            "pair {src}->{dst} references a node outside 0..{n}"
        )));
    }
    if src == dst {
        return Err(Error::Topology(format!("pair {src}->{dst} has no route to itself")));
    }
    Ok(())
}

/// Enumerates the minimum-hop paths from `src` to `dst`.
///
/// Weights follow router ECMP: at every node the arriving share splits evenly
/// over the outgoing links that lie on some shortest path to `dst`.
pub fn ecmp_paths(topology: &Topology, src: NodeId, dst: NodeId) -> Result<PathSet> {
    check_pair(topology, src, dst)?;
    let dist = hops_to(topology, dst);
    if dist[src] == UNREACHABLE {
        return Err(Error::Unreachable { src, dst });
    }
    let mut paths = Vec::new();
    let mut stack = vec![(src, Vec::new(), 1.0)];
    while let Some((u, prefix, weight)) = stack.pop() {
        if u == dst {
            paths.push(WeightedPath {
                links: prefix,
                weight,
            });
            continue;
        }
        let hops: Vec<LinkId> = next_hops(topology, &dist, u).collect();
        let share = weight / hops.len() as f64;
        for &l in hops.iter().rev() {
            let mut links = prefix.clone();
            links.push(l);
            stack.push((topology.link(l).dst, links, share));
        }
    }
    Ok(PathSet { src, dst, paths })
}

/// Weighted path delay: `sum_p weight_p * sum_{l in p} link_delay(load_l)`.
pub fn end_to_end_delay(pathset: &PathSet, loads: &LinkLoadMap, topology: &Topology) -> f64 {
    pathset
        .paths
        .iter()
        .map(|p| {
            p.weight
                * p.links
                    .iter()
                    .map(|&l| topology.link(l).delay(loads.get(l)))
                    .sum::<f64>()
        })
        .sum()
}

/// Routes every `(src, dst, amount)` demand over its ECMP paths and sums the
/// per-link traffic. Demands with `src == dst` carry nothing.
pub fn accumulate_loads(
    demands: &[(NodeId, NodeId, f64)],
    topology: &Topology,
) -> Result<LinkLoadMap> {
    let mut loads = LinkLoadMap::zeros(topology.n_links());
    for &(src, dst, amount) in demands {
        if src == dst {
            continue;
        }
        for path in ecmp_paths(topology, src, dst)?.paths {
            for l in path.links {
                loads.add(l, amount * path.weight);
            }
        }
    }
    Ok(loads)
}

/// A topology together with its precomputed ECMP forwarding state.
///
/// For every ordered node pair the network stores the share of a unit flow
/// carried by each link, which turns load accumulation and path delay into
/// sparse dot products. Immutable once built; a link failure produces a new
/// `Network`.
#[derive(Debug, Clone)]
pub struct Network {
    topology: Topology,
    shares: Vec<Option<Box<[(LinkId, f64)]>>>,
}

impl Network {
    pub fn new(topology: Topology) -> Self {
        let n = topology.n_nodes();
        let mut shares = vec![None; n * n];
        let mut flow = vec![0.0; n];
        for dst in 0..n {
            let dist = hops_to(&topology, dst);
            let mut order: Vec<NodeId> = (0..n).filter(|&u| dist[u] != UNREACHABLE).collect();
            order.sort_by_key(|&u| std::cmp::Reverse(dist[u]));
            let hops: Vec<Vec<LinkId>> = (0..n)
                .map(|u| next_hops(&topology, &dist, u).collect())
                .collect();
            for src in 0..n {
                if src == dst {
                    shares[src * n + dst] = Some(Box::default());
                    continue;
                }
                if dist[src] == UNREACHABLE {
                    continue;
                }
                flow.iter_mut().for_each(|f| *f = 0.0);
                flow[src] = 1.0;
                let mut pair = Vec::new();
                for &u in order.iter().skip_while(|&&u| dist[u] > dist[src]) {
                    if u == dst || flow[u] == 0.0 {
                        continue;
                    }
                    let share = flow[u] / hops[u].len() as f64;
                    for &l in &hops[u] {
                        pair.push((l, share));
                        flow[topology.link(l).dst] += share;
                    }
                }
                pair.sort_by_key(|&(l, _)| l);
                shares[src * n + dst] = Some(pair.into_boxed_slice());
            }
        }
        Self { topology, shares }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn n_links(&self) -> usize {
        self.topology.n_links()
    }

    /// Per-link share of one unit of `src -> dst` traffic.
    pub fn link_shares(&self, src: NodeId, dst: NodeId) -> Result<&[(LinkId, f64)]> {
        let n = self.topology.n_nodes();
        if src >= n || dst >= n {
            return Err(Error::Topology(format!(
                "pair {src}->{dst} references a node outside 0..{n}"
            )));
        }
        self.shares[src * n + dst]
            .as_deref()
            .ok_or(Error::Unreachable { src, dst })
    }

    pub fn is_routable(&self, src: NodeId, dst: NodeId) -> bool {
        self.link_shares(src, dst).is_ok()
    }

    pub fn ecmp_paths(&self, src: NodeId, dst: NodeId) -> Result<PathSet> {
        ecmp_paths(&self.topology, src, dst)
    }

    /// Adds `amount` of `src -> dst` traffic into a raw load vector.
    pub fn add_flow(&self, loads: &mut [f64], src: NodeId, dst: NodeId, amount: f64) -> Result<()> {
        for &(l, share) in self.link_shares(src, dst)? {
            loads[l] += amount * share;
        }
        Ok(())
    }

    /// Same contract as [`accumulate_loads`], using the cached forwarding state.
    pub fn accumulate(&self, demands: &[(NodeId, NodeId, f64)]) -> Result<LinkLoadMap> {
        let mut loads = vec![0.0; self.n_links()];
        for &(src, dst, amount) in demands {
            self.add_flow(&mut loads, src, dst, amount)?;
        }
        Ok(LinkLoadMap::from_vec(loads))
    }

    /// Delay of every link under `loads`.
    pub fn link_delays(&self, loads: &[f64], model: DelayModel) -> Vec<f64> {
        self.topology
            .links()
            .iter()
            .zip(loads)
            .map(|(link, &x)| model.delay(x, link))
            .collect()
    }

    /// End-to-end `src -> dst` delay given precomputed per-link delays.
    pub fn pair_delay(&self, src: NodeId, dst: NodeId, link_delays: &[f64]) -> Result<f64> {
        Ok(self
            .link_shares(src, dst)?
            .iter()
            .map(|&(l, share)| share * link_delays[l])
            .sum())
    }

    pub fn max_utilization(&self, loads: &[f64]) -> f64 {
        loads
            .iter()
            .zip(self.topology.links())
            .map(|(x, l)| x / l.capacity)
            .fold(0.0, f64::max)
    }

    /// Fails one random non-bridge link and rebuilds the forwarding state.
    pub fn fail_random_link(&self, seed: u64) -> Result<(Network, Vec<Link>)> {
        let (topology, dropped) = self.topology.fail_random_edge(seed)?;
        Ok((Network::new(topology), dropped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(a: NodeId, b: NodeId) -> Link {
        Link::new(a, b, 10.0)
            .with_service_weight(0.01)
            .with_propagation(0.0)
    }

    // S=0, A=1, B=2, T=3
    fn diamond() -> Topology {
        Topology::directed(4, vec![unit(0, 1), unit(0, 2), unit(1, 3), unit(2, 3)]).unwrap()
    }

    // S=0, A=1, B=2, C1=3, C2=4, T=5; S-A-Ci-T and S-B-X-T all three hops.
    fn uneven() -> Topology {
        Topology::directed(
            7,
            vec![
                unit(0, 1),
                unit(0, 2),
                unit(1, 3),
                unit(1, 4),
                unit(3, 5),
                unit(4, 5),
                unit(2, 6),
                unit(6, 5),
            ],
        )
        .unwrap()
    }

    fn weights_by_path(ps: &PathSet) -> Vec<(Vec<LinkId>, f64)> {
        let mut v: Vec<_> = ps.paths.iter().map(|p| (p.links.clone(), p.weight)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    #[test]
    fn diamond_splits_evenly() {
        let ps = ecmp_paths(&diamond(), 0, 3).unwrap();
        assert_eq!(
            weights_by_path(&ps),
            vec![(vec![0, 2], 0.5), (vec![1, 3], 0.5)]
        );
    }

    #[test]
    fn per_next_hop_split_is_not_per_path() {
        let ps = ecmp_paths(&uneven(), 0, 5).unwrap();
        assert_eq!(
            weights_by_path(&ps),
            vec![
                (vec![0, 2, 4], 0.25),
                (vec![0, 3, 5], 0.25),
                (vec![1, 6, 7], 0.5)
            ]
        );
    }

    #[test]
    fn chain_has_single_path() {
        let t = Topology::undirected(3, vec![unit(0, 1), unit(1, 2)]).unwrap();
        let ps = ecmp_paths(&t, 0, 2).unwrap();
        assert_eq!(ps.paths.len(), 1);
        assert_eq!(ps.paths[0].weight, 1.0);
    }

    #[test]
    fn unreachable_pair_is_reported() {
        let t = Topology::directed(3, vec![unit(0, 1)]).unwrap();
        assert!(matches!(
            ecmp_paths(&t, 1, 0),
            Err(Error::Unreachable { src: 1, dst: 0 })
        ));
        let net = Network::new(t);
        assert!(matches!(
            net.link_shares(2, 0),
            Err(Error::Unreachable { src: 2, dst: 0 })
        ));
    }

    #[test]
    fn single_path_delay_sums_links() {
        let t = Topology::undirected(
            3,
            vec![
                Link::new(0, 1, 10.0)
                    .with_service_weight(0.01)
                    .with_propagation(0.005),
                Link::new(1, 2, 10.0)
                    .with_service_weight(0.01)
                    .with_propagation(0.005),
            ],
        )
        .unwrap();
        let ps = ecmp_paths(&t, 0, 2).unwrap();
        let loads = LinkLoadMap::zeros(t.n_links());
        assert!((end_to_end_delay(&ps, &loads, &t) - 0.030).abs() < 1e-15);
    }

    #[test]
    fn weighted_mean_of_path_delays() {
        // Two parallel single-link paths with zero-load delays 0.02 and 0.04.
        let t = Topology::directed(
            2,
            vec![
                Link::new(0, 1, 1.0).with_service_weight(0.02).with_propagation(0.0),
                Link::new(0, 1, 1.0).with_service_weight(0.04).with_propagation(0.0),
            ],
        )
        .unwrap();
        let ps = ecmp_paths(&t, 0, 1).unwrap();
        assert_eq!(ps.paths.len(), 2);
        let loads = LinkLoadMap::zeros(2);
        assert!((end_to_end_delay(&ps, &loads, &t) - 0.03).abs() < 1e-15);
    }

    #[test]
    fn loaded_diamond_delay() {
        let t = diamond();
        let loads = accumulate_loads(&[(0, 3, 10.0)], &t).unwrap();
        assert_eq!(loads.as_slice(), &[5.0, 5.0, 5.0, 5.0]);
        let ps = ecmp_paths(&t, 0, 3).unwrap();
        // Each link: 0.01 / (1 - 0.5) = 0.02, two hops.
        assert!((end_to_end_delay(&ps, &loads, &t) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn loads_are_additive() {
        let t = Topology::undirected(3, vec![unit(0, 1), unit(1, 2)]).unwrap();
        let loads = accumulate_loads(&[(0, 2, 10.0), (1, 2, 6.0)], &t).unwrap();
        // link 2 is 1->2
        assert_eq!(loads.get(2), 16.0);
    }

    #[test]
    fn uneven_split_loads() {
        let loads = accumulate_loads(&[(0, 5, 8.0)], &uneven()).unwrap();
        assert_eq!(loads.get(2), 2.0);
        assert_eq!(loads.get(3), 2.0);
        assert_eq!(loads.get(6), 4.0);
    }

    #[test]
    fn cached_shares_agree_with_path_enumeration() {
        let t = crate::netsim::RandomTopology {
            nodes: 14,
            extra_edges: 12,
            ..Default::default()
        }
        .generate(5)
        .unwrap();
        let net = Network::new(t.clone());
        let demands: Vec<_> = (0..14)
            .flat_map(|s| (0..14).map(move |d| (s, d, (1 + s + 2 * d) as f64)))
            .collect();
        let slow = accumulate_loads(&demands, &t).unwrap();
        let fast = net.accumulate(&demands).unwrap();
        for (a, b) in slow.as_slice().iter().zip(fast.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
        let delays = net.link_delays(fast.as_slice(), DelayModel::Queueing);
        for (s, d) in [(0, 13), (4, 7), (12, 1)] {
            let ps = ecmp_paths(&t, s, d).unwrap();
            let reference = end_to_end_delay(&ps, &fast, &t);
            assert!((net.pair_delay(s, d, &delays).unwrap() - reference).abs() < 1e-12);
        }
    }
}
