mod common;

use rand::Rng;

use common::*;
use tomosplit::env::{BlockSimplexSpace, SplitAction};
use tomosplit::fw::{
    fw_solve, fw_solve_observed, lp_vertex, random_feasible, softmax_blocks, softmax_blocks_backward, FwConfig,
};

fn vertices(space: &BlockSimplexSpace) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for &m in space.block_sizes() {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..m).map(move |k| {
                    let mut v = prefix.clone();
                    v.extend((0..m).map(|c| if c == k { 1.0 } else { 0.0 }));
                    v
                })
            })
            .collect();
    }
    out
}

#[test]
fn lp_vertex_minimizes_over_all_vertices() {
    let mut rng = rng(21);
    for _ in 0..100 {
        let sizes: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(1..5)).collect();
        let space = BlockSimplexSpace::new(sizes).unwrap();
        let g: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = lp_vertex(&g, &space).unwrap();
        let dot = |v: &[f64]| v.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let best = vertices(&space).iter().map(|v| dot(v)).fold(f64::INFINITY, f64::min);
        assert_eq!(dot(z.values()), best);
    }
}

#[test]
fn lp_vertex_breaks_ties_by_lowest_index() {
    let space = BlockSimplexSpace::uniform(1, 3).unwrap();
    assert_eq!(lp_vertex(&[0.5, -1.0, -1.0], &space).unwrap().values(), &[0.0, 1.0, 0.0]);
}

#[test]
fn quadratic_gap_shrinks_like_one_over_k() {
    // f = |x - y|^2 with y outside the simplex: the classic 2 L D^2 / (k + 2) envelope, L = 2, D^2 = 2.
    let space = BlockSimplexSpace::uniform(1, 3).unwrap();
    let y = [1.2, -0.3, 0.4];
    let f = |x: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let proj = [0.9, 0.0, 0.1];
    let mut trace = Vec::new();
    fw_solve_observed(
        |x: &SplitAction| Ok(x.values().iter().zip(y).map(|(a, b)| 2.0 * (a - b)).collect()),
        &space,
        &FwConfig { distance_tolerance: 1e-300, ..FwConfig::default() },
        space.equal_split(),
        |k, x| trace.push((k, f(x.values()))),
    )
    .unwrap();
    let fstar = f(&proj);
    for &(k, fk) in trace.iter().skip(1) {
        assert!(fk - fstar <= 8.0 / (k as f64 + 2.0) + 1e-12, "k = {k}");
    }
    assert!(trace.last().unwrap().1 - fstar < 1e-3);
}

#[test]
fn brute_force_grid_agrees_on_a_separable_problem() {
    // Two 3-simplices, separable quadratic: compare with a 1/200 grid per block.
    let space = BlockSimplexSpace::uniform(2, 3).unwrap();
    let targets = [[0.5, 0.4, 0.3], [-0.2, 0.9, 0.6]];
    let f_block = |b: usize, x: &[f64]| x.iter().zip(targets[b]).map(|(a, t)| (a - t).powi(2)).sum::<f64>();
    let grid_best = |b: usize| {
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            for j in 0..=200 - i {
                let x = [i as f64 / 200.0, j as f64 / 200.0, (200 - i - j) as f64 / 200.0];
                best = best.min(f_block(b, &x));
            }
        }
        best
    };
    let out = fw_solve(
        |x: &SplitAction| {
            let v = x.values();
            Ok((0..6).map(|c| 2.0 * (v[c] - targets[c / 3][c % 3])).collect())
        },
        &space,
        &FwConfig::default(),
        space.equal_split(),
    )
    .unwrap();
    let v = out.action.values();
    let got = f_block(0, &v[..3]) + f_block(1, &v[3..]);
    assert!(got - (grid_best(0) + grid_best(1)) < 1e-2);
    space.validate(v).unwrap();
}

#[test]
fn random_feasible_is_uniform_on_each_simplex() {
    let space = BlockSimplexSpace::new(vec![3, 1, 4]).unwrap();
    let pts = random_feasible(&space, 7, 40_000);
    let mut mean = vec![0.0; space.dim()];
    let mut sq0 = 0.0;
    for p in &pts {
        space.validate(p.values()).unwrap();
        for (m, v) in mean.iter_mut().zip(p.values()) {
            *m += v / pts.len() as f64;
        }
        sq0 += p.values()[0].powi(2) / pts.len() as f64;
    }
    for b in 0..space.n_blocks() {
        let r = space.block_range(b);
        let m = r.len() as f64;
        for c in r {
            assert!((mean[c] - 1.0 / m).abs() < 0.01, "coord {c}: {}", mean[c]);
        }
    }
    // Dirichlet(1,1,1): E[x^2] = 2 / (m (m + 1)) = 1/6.
    assert!((sq0 - 1.0 / 6.0).abs() < 0.005);
    assert_eq!(random_feasible(&space, 7, 5), random_feasible(&space, 7, 5));
}

#[test]
fn softmax_backward_matches_finite_differences() {
    let space = BlockSimplexSpace::new(vec![3, 2]).unwrap();
    let v = [0.3, -1.2, 0.7, 2.0, -0.5];
    let w = [1.0, -2.0, 0.5, 3.0, 0.25];
    let f = |x: &[f64]| softmax_blocks(x, &space).unwrap().values().iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
    let a = softmax_blocks(&v, &space).unwrap();
    let analytic = softmax_blocks_backward(a.values(), &w, &space);
    let numeric = central_difference(f, &v, 1e-6);
    assert!(relative_error(&analytic, &numeric) < 1e-8);
}
