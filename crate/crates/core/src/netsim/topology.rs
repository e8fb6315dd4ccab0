use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Link, LinkId, NodeId};
use crate::error::{Error, Result};

/// A directed multigraph of [`Link`]s over nodes `0..n_nodes`.
///
/// Undirected inputs are expanded into symmetric link pairs; both directions
/// share one logical edge, which is the unit a link failure removes.
#[derive(Debug, Clone)]
pub struct Topology {
    n_nodes: usize,
    links: Vec<Link>,
    directed: bool,
    edge_of: Vec<usize>,
    n_edges: usize,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
}

impl Topology {
    /// Builds a directed topology; every link is its own failure unit.
    pub fn directed(n_nodes: usize, links: Vec<Link>) -> Result<Self> {
        let edge_of = (0..links.len()).collect();
        let n_edges = links.len();
        Self::assemble(n_nodes, links, true, edge_of, n_edges)
    }

    /// Builds a topology from undirected edges, each expanded to two directed
    /// links with identical parameters.
    pub fn undirected(n_nodes: usize, edges: Vec<Link>) -> Result<Self> {
        let n_edges = edges.len();
        let mut links = Vec::with_capacity(2 * n_edges);
        let mut edge_of = Vec::with_capacity(2 * n_edges);
        for (e, fwd) in edges.into_iter().enumerate() {
            let rev = Link {
                src: fwd.dst,
                dst: fwd.src,
                ..fwd.clone()
            };
            links.push(fwd);
            links.push(rev);
            edge_of.push(e);
            edge_of.push(e);
        }
        Self::assemble(n_nodes, links, false, edge_of, n_edges)
    }

    fn assemble(
        n_nodes: usize,
        links: Vec<Link>,
        directed: bool,
        edge_of: Vec<usize>,
        n_edges: usize,
    ) -> Result<Self> {
        let mut out_links = vec![Vec::new(); n_nodes];
        let mut in_links = vec![Vec::new(); n_nodes];
        for (id, link) in links.iter().enumerate() {
            link.validate()?;
            if link.src >= n_nodes || link.dst >= n_nodes {
                return Err(Error::Topology(format!(
                    "link {}->{} references a node outside 0..{}",
                    link.src, link.dst, n_nodes
                )));
            }
            out_links[link.src].push(id);
            in_links[link.dst].push(id);
        }
        Ok(Self {
            n_nodes,
            links,
            directed,
            edge_of,
            n_edges,
            out_links,
            in_links,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    /// Number of failure units (undirected edges, or links for directed input).
    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node]
    }

    pub fn in_links(&self, node: NodeId) -> &[LinkId] {
        &self.in_links[node]
    }

    pub fn edge_of(&self, link: LinkId) -> usize {
        self.edge_of[link]
    }

    /// Links belonging to logical edge `edge`.
    pub fn edge_links(&self, edge: usize) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.links.len()).filter(move |&l| self.edge_of[l] == edge)
    }

    /// True when every node reaches every other node.
    pub fn is_connected(&self) -> bool {
        self.is_connected_without(None)
    }

    fn is_connected_without(&self, removed_edge: Option<usize>) -> bool {
        if self.n_nodes <= 1 {
            return true;
        }
        let alive = |l: LinkId| Some(self.edge_of[l]) != removed_edge;
        let reach = |forward: bool| {
            let mut seen = vec![false; self.n_nodes];
            let mut queue = VecDeque::from([0]);
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = queue.pop_front() {
                let adj = if forward {
                    &self.out_links[u]
                } else {
                    &self.in_links[u]
                };
                for &l in adj.iter().filter(|&&l| alive(l)) {
                    let v = if forward {
                        self.links[l].dst
                    } else {
                        self.links[l].src
                    };
                    if !seen[v] {
                        seen[v] = true;
                        count += 1;
                        queue.push_back(v);
                    }
                }
            }
            count
        };
        reach(true) == self.n_nodes && reach(false) == self.n_nodes
    }

    /// Edges whose removal leaves the topology connected, ascending.
    pub fn removable_edges(&self) -> Vec<usize> {
        if !self.is_connected() {
            return Vec::new();
        }
        (0..self.n_edges)
            .filter(|&e| self.is_connected_without(Some(e)))
            .collect()
    }

    /// A copy without the links of `edge`. Link ids are renumbered.
    pub fn without_edge(&self, edge: usize) -> Result<Topology> {
        if edge >= self.n_edges {
            return Err(Error::Mutation(format!("no edge {edge}")));
        }
        let mut links = Vec::with_capacity(self.links.len());
        let mut edge_of = Vec::with_capacity(self.links.len());
        for (l, link) in self.links.iter().enumerate() {
            let e = self.edge_of[l];
            if e != edge {
                links.push(link.clone());
                edge_of.push(if e > edge { e - 1 } else { e });
            }
        }
        Self::assemble(self.n_nodes, links, self.directed, edge_of, self.n_edges - 1)
    }

    /// Removes one uniformly chosen non-bridge edge; returns the new topology
    /// and the links that were dropped.
    pub fn fail_random_edge(&self, seed: u64) -> Result<(Topology, Vec<Link>)> {
        let candidates = self.removable_edges();
        if candidates.is_empty() {
            return Err(Error::Mutation(
                "every link is a bridge; no link can fail without disconnecting the network"
                    .into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edge = candidates[rng.random_range(0..candidates.len())];
        let dropped = self.edge_links(edge).map(|l| self.links[l].clone()).collect();
        Ok((self.without_edge(edge)?, dropped))
    }

    /// Parses the line-oriented topology format.
    ///
    /// ```text
    /// # comment
    /// undirected                      (or `directed`; default undirected)
    /// src dst capacity [service_weight [propagation [congestion_delay]]]
    /// ```
    pub fn parse(text: &str, origin: &Path) -> Result<Topology> {
        let mut directed = false;
        let mut seen_record = false;
        let mut links = Vec::new();
        let mut max_node = None::<NodeId>;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "directed" || line == "undirected" {
                if seen_record {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        "orientation directive must precede link records",
                    ));
                }
                directed = line == "directed";
                continue;
            }
            seen_record = true;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !(3..=6).contains(&fields.len()) {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected 3 to 6 fields, found {}", fields.len()),
                ));
            }
            let node = |s: &str| {
                s.parse::<NodeId>()
                    .map_err(|_| Error::parse(origin, lineno, format!("bad node id `{s}`")))
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(origin, lineno, format!("bad number `{s}`")))
            };
            let mut link = Link::new(node(fields[0])?, node(fields[1])?, num(fields[2])?);
            if let Some(f) = fields.get(3) {
                link.service_weight = num(f)?;
            }
            if let Some(f) = fields.get(4) {
                link.propagation = num(f)?;
            }
            if let Some(f) = fields.get(5) {
                link.congestion_delay = num(f)?;
            }
            link.validate()
                .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
            max_node = Some(max_node.unwrap_or(0).max(link.src).max(link.dst));
            links.push(link);
        }
        let n_nodes = max_node.map_or(0, |m| m + 1);
        if directed {
            Topology::directed(n_nodes, links)
        } else {
            Topology::undirected(n_nodes, links)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Topology> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    /// Serializes back into the text format; `parse(to_text())` reproduces the topology.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(if self.directed {
            "directed\n"
        } else {
            "undirected\n"
        });
        let mut written = HashSet::new();
        for (l, link) in self.links.iter().enumerate() {
            if !written.insert(self.edge_of[l]) {
                continue;
            }
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                link.src,
                link.dst,
                link.capacity,
                link.service_weight,
                link.propagation,
                link.congestion_delay
            );
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Returns `topology` with one uniformly chosen link removed (both directions
/// for undirected input) such that all nodes stay connected.
pub fn fail_random_link(topology: &Topology, seed: u64) -> Result<Topology> {
    topology.fail_random_edge(seed).map(|(t, _)| t)
}

/// Parameters for a random connected undirected topology: a random spanning
/// tree plus `extra_edges` chords, with per-edge capacity and propagation
/// drawn uniformly from the given ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomTopology {
    pub nodes: usize,
    pub extra_edges: usize,
    pub capacity: (f64, f64),
    pub propagation: (f64, f64),
    pub service_weight: f64,
}

impl Default for RandomTopology {
    fn default() -> Self {
        Self {
            nodes: 20,
            extra_edges: 20,
            capacity: (50.0, 150.0),
            propagation: (0.001, 0.01),
            service_weight: super::DEFAULT_SERVICE_WEIGHT,
        }
    }
}

impl RandomTopology {
    pub fn generate(&self, seed: u64) -> Result<Topology> {
        if self.nodes < 2 {
            return Err(Error::Topology("need at least two nodes".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = HashSet::new();
        let mut edges = Vec::new();
        let draw = |rng: &mut ChaCha8Rng, a: NodeId, b: NodeId| {
            let cap = uniform(rng, self.capacity);
            let prop = uniform(rng, self.propagation);
            Link::new(a, b, cap)
                .with_service_weight(self.service_weight)
                .with_propagation(prop)
        };
        for v in 1..self.nodes {
            let u = rng.random_range(0..v);
            pairs.insert((u, v));
            edges.push(draw(&mut rng, u, v));
        }
        let max_extra = self.nodes * (self.nodes - 1) / 2 - edges.len();
        let target = self.extra_edges.min(max_extra);
        let mut added = 0;
        while added < target {
            let a = rng.random_range(0..self.nodes);
            let b = rng.random_range(0..self.nodes);
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if pairs.insert(key) {
                edges.push(draw(&mut rng, key.0, key.1));
                added += 1;
            }
        }
        Topology::undirected(self.nodes, edges)
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(a: NodeId, b: NodeId) -> Link {
        Link::new(a, b, 10.0)
    }

    fn triangle() -> Topology {
        Topology::undirected(3, vec![unit(0, 1), unit(1, 2), unit(0, 2)]).unwrap()
    }

    #[test]
    fn undirected_edges_expand_to_link_pairs() {
        let t = triangle();
        assert_eq!(t.n_links(), 6);
        assert_eq!(t.n_edges(), 3);
        assert_eq!(t.link(1).src, 1);
        assert_eq!(t.link(1).dst, 0);
        assert_eq!(t.edge_of(0), t.edge_of(1));
    }

    #[test]
    fn rejects_self_loops_and_unknown_nodes() {
        assert!(Topology::undirected(2, vec![unit(1, 1)]).is_err());
        assert!(Topology::directed(2, vec![unit(0, 5)]).is_err());
    }

    #[test]
    fn triangle_failure_keeps_connectivity() {
        let t = triangle();
        for seed in 0..20 {
            let (after, dropped) = t.fail_random_edge(seed).unwrap();
            assert_eq!(after.n_edges(), 2);
            assert_eq!(after.n_links(), 4);
            assert_eq!(dropped.len(), 2);
            assert!(after.is_connected());
        }
        assert_eq!(t.n_links(), 6, "original untouched");
    }

    #[test]
    fn chain_has_no_removable_link() {
        let chain = Topology::undirected(3, vec![unit(0, 1), unit(1, 2)]).unwrap();
        assert!(matches!(
            fail_random_link(&chain, 1),
            Err(Error::Mutation(_))
        ));
    }

    #[test]
    fn failure_is_deterministic_under_seed() {
        let t = RandomTopology::default().generate(3).unwrap();
        let a = fail_random_link(&t, 42).unwrap().to_text();
        let b = fail_random_link(&t, 42).unwrap().to_text();
        assert_eq!(a, b);
    }

    #[test]
    fn text_round_trip() {
        let t = RandomTopology::default().generate(9).unwrap();
        let back = Topology::parse(&t.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back.links(), t.links());
        assert_eq!(back.n_nodes(), t.n_nodes());
    }

    #[test]
    fn parse_defaults_comments_and_errors() {
        let text = "# demo\n\n0 1 10\n1 2 5 0.002 # trailing\n2 0 5 0.002 0.004 2\n";
        let t = Topology::parse(text, Path::new("demo.topo")).unwrap();
        assert_eq!(t.n_nodes(), 3);
        assert_eq!(t.n_links(), 6);
        let first = t.link(0);
        assert_eq!(first.service_weight, crate::netsim::DEFAULT_SERVICE_WEIGHT);
        assert_eq!(first.propagation, crate::netsim::DEFAULT_PROPAGATION);
        assert_eq!(first.congestion_delay, 1.0);
        assert_eq!(t.link(4).congestion_delay, 2.0);

        let err = Topology::parse("0 1 10\n0 x 3\n", Path::new("bad.topo")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = Topology::parse("0 1 -3\n", Path::new("bad.topo")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn directed_directive() {
        let t = Topology::parse("directed\n0 1 1\n1 0 1\n", Path::new("d")).unwrap();
        assert!(t.is_directed());
        assert_eq!(t.n_links(), 2);
        assert_eq!(t.n_edges(), 2);
    }

    #[test]
    fn generated_topology_is_connected() {
        for seed in 0..10 {
            let t = RandomTopology {
                nodes: 12,
                extra_edges: 6,
                ..Default::default()
            }
            .generate(seed)
            .unwrap();
            assert!(t.is_connected());
            assert_eq!(t.n_edges(), 11 + 6);
        }
    }
}
