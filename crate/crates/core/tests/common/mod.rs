#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tomosplit::env::{Problem, SplitAction};
use tomosplit::netsim::{accumulate_loads, Link, LinkId, NodeId, Topology};
use tomosplit::neural::Mlp;
use tomosplit::traffic::TrafficMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected undirected graph on `2..=max_nodes` nodes: a random tree,
/// extra chords, and occasional parallel copies of existing edges.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> Topology {
    let n = rng.random_range(2..=max_nodes);
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a, b));
        }
    }
    if rng.random_bool(0.3) {
        let dup = edges[rng.random_range(0..edges.len())];
        edges.push(dup);
    }
    let links = edges
        .into_iter()
        .map(|(a, b)| Link::new(a, b, rng.random_range(5.0..50.0)))
        .collect();
    Topology::undirected(n, links).unwrap()
}

/// Every simple path from `src` to `dst` as a list of link ids.
pub fn simple_paths(t: &Topology, src: NodeId, dst: NodeId) -> Vec<Vec<LinkId>> {
    fn walk(t: &Topology, u: NodeId, dst: NodeId, seen: &mut Vec<bool>, path: &mut Vec<LinkId>, out: &mut Vec<Vec<LinkId>>) {
        if u == dst {
            out.push(path.clone());
            return;
        }
        for &l in t.out_links(u) {
            let v = t.link(l).dst;
            if seen[v] {
                continue;
            }
            seen[v] = true;
            path.push(l);
            walk(t, v, dst, seen, path, out);
            path.pop();
            seen[v] = false;
        }
    }
    let mut seen = vec![false; t.n_nodes()];
    seen[src] = true;
    let mut out = Vec::new();
    walk(t, src, dst, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// Minimum-hop paths by exhaustive enumeration, weighted by per-hop equal
/// splitting: at each node the share divides by the number of distinct first
/// links among that node's own minimum-hop paths to `dst`.
pub fn brute_force_ecmp(t: &Topology, src: NodeId, dst: NodeId) -> Vec<(Vec<LinkId>, f64)> {
    let shortest = |from: NodeId| {
        let all = simple_paths(t, from, dst);
        let best = all.iter().map(Vec::len).min().unwrap_or(0);
        all.into_iter().filter(|p| p.len() == best).collect::<Vec<_>>()
    };
    let fanout = |from: NodeId| {
        let mut firsts: Vec<LinkId> = shortest(from).iter().map(|p| p[0]).collect();
        firsts.sort_unstable();
        firsts.dedup();
        firsts.len()
    };
    let mut out: Vec<(Vec<LinkId>, f64)> = shortest(src)
        .into_iter()
        .map(|p| {
            let mut w = 1.0;
            for &l in &p {
                w /= fanout(t.link(l).src) as f64;
            }
            (p, w)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Straightforward forward pass returning the pre-activations of every layer.
pub fn naive_forward(mlp: &Mlp, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sizes = mlp.sizes();
    let p = mlp.params();
    let mut a = x.to_vec();
    let mut pre = Vec::new();
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &p[mlp.weight_range(l)];
        let b = &p[mlp.bias_range(l)];
        let z: Vec<f64> = (0..n_out)
            .map(|j| b[j] + (0..n_in).map(|i| a[i] * w[i * n_out + j]).sum::<f64>())
            .collect();
        a = if l + 2 < sizes.len() {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        pre.push(z);
    }
    (a, pre)
}

pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Triangle 0-1 (direct, thin), 0-2-1 (detour, wide) plus a chain 2-3-4.
pub const SEGMENT_FIXTURE: &str = "\
# direct link is the thin one
0 1 10
0 2 40
2 1 40
2 3 40
3 4 40
";

/// Two egress agents whose first egresses share the 6-7 bottleneck.
pub const BOTTLENECK_FIXTURE: &str = "\
0 6 40
2 6 40
6 7 20
7 4 40
7 5 40
1 4 15
3 5 15
";

pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Link loads of a joint step rebuilt from scratch: every agent's routed
/// demands plus all unclaimed matrix entries, pushed through
/// `accumulate_loads` on `topology`.
pub fn expected_joint_loads(
    topology: &Topology,
    problems: &[Problem],
    tm: &TrafficMatrix,
    actions: &[SplitAction],
) -> Vec<f64> {
    let n = tm.n();
    let mut claims = vec![0usize; n * n];
    for p in problems {
        for (i, j) in p.controlled_entries() {
            claims[i * n + j] += 1;
        }
    }
    let share = |i: NodeId, j: NodeId| tm.get(i, j) / claims[i * n + j] as f64;
    let mut demands = Vec::new();
    for (i, j, d) in tm.demands() {
        if claims[i * n + j] == 0 {
            demands.push((i, j, d));
        }
    }
    for (p, action) in problems.iter().zip(actions) {
        let x = action.values();
        match p {
            Problem::Egress(e) => {
                let m = e.egresses().len();
                for (b, prefix) in e.prefixes().iter().enumerate() {
                    let d = prefix.destination;
                    let total: f64 = e.egresses().iter().map(|&g| share(g, d)).sum();
                    for (k, &g) in e.egresses().iter().enumerate() {
                        demands.push((g, d, total * x[b * m + k]));
                    }
                }
            }
            Problem::Segment(s) => {
                let mut c = 0;
                for (&(i, j), cands) in s.pairs().iter().zip(s.candidates()) {
                    let total = share(i, j);
                    for &mid in cands {
                        let amount = total * x[c];
                        if mid == j {
                            demands.push((i, j, amount));
                        } else {
                            demands.push((i, mid, amount));
                            demands.push((mid, j, amount));
                        }
                        c += 1;
                    }
                }
            }
        }
    }
    accumulate_loads(&demands, topology).unwrap().as_slice().to_vec()
}

pub fn loads_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}
