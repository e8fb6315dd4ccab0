//! ECMP path sets and the link loads they induce on a small grid.

use tomosplit::netsim::{Link, Network, Topology};

fn main() -> tomosplit::Result<()> {
    // 3x3 grid, nodes numbered row by row.
    let mut edges = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            let v = 3 * r + c;
            if c < 2 {
                edges.push(Link::new(v, v + 1, 10.0));
            }
            if r < 2 {
                edges.push(Link::new(v, v + 3, 10.0));
            }
        }
    }
    let net = Network::new(Topology::undirected(9, edges)?);
    let paths = net.ecmp_paths(0, 8)?;
    println!("{} shortest paths from corner to corner:", paths.paths.len());
    for p in &paths.paths {
        let hops: Vec<String> = p.links.iter().map(|&l| net.topology().link(l).dst.to_string()).collect();
        println!("  weight {:.4}: 0 -> {}", p.weight, hops.join(" -> "));
    }
    let loads = net.accumulate(&[(0, 8, 6.0)])?;
    for (l, link) in net.topology().links().iter().enumerate() {
        if loads.get(l) > 0.0 {
            println!("link {}->{} carries {:.3}", link.src, link.dst, loads.get(l));
        }
    }
    Ok(())
}
