//! Frank-Wolfe over products of probability simplices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::env::{BlockSimplexSpace, SplitAction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwConfig {
    pub max_iters: usize,
    /// Stop once the LP vertex is this close to the iterate (Euclidean).
    pub distance_tolerance: f64,
    /// Gradients with every entry below this in magnitude count as converged.
    pub zero_gradient: f64,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            distance_tolerance: 1e-5,
            zero_gradient: 1e-12,
        }
    }
}

impl FwConfig {
    pub fn with_max_iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("Frank-Wolfe needs at least one iteration".into()));
        }
        if !(self.distance_tolerance > 0.0) {
            return Err(Error::Config("Frank-Wolfe tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Minimizer of `<z, gradient>` over the polytope: per block, all mass on the
/// smallest gradient entry, lowest index on ties.
pub fn lp_vertex(gradient: &[f64], space: &BlockSimplexSpace) -> Result<SplitAction> {
    space.check_dim(gradient.len())?;
    let mut z = vec![0.0; space.dim()];
    for b in 0..space.n_blocks() {
        let range = space.block_range(b);
        let mut best = range.start;
        for c in range {
            if gradient[c] < gradient[best] {
                best = c;
            }
        }
        z[best] = 1.0;
    }
    Ok(SplitAction::from_vec_unchecked(z))
}

/// Step size `2 / (k + 2)` of iteration `k`.
pub fn step_size(k: usize) -> f64 {
    2.0 / (k as f64 + 2.0)
}

pub fn fw_step(current: &SplitAction, vertex: &SplitAction, k: usize) -> Result<SplitAction> {
    if current.len() != vertex.len() {
        return Err(Error::Dimension {
            expected: current.len(),
            got: vertex.len(),
        });
    }
    let gamma = step_size(k);
    Ok(SplitAction::from_vec_unchecked(
        current
            .values()
            .iter()
            .zip(vertex.values())
            .map(|(x, z)| if gamma == 1.0 { *z } else { (1.0 - gamma) * x + gamma * z })
            .collect(),
    ))
}

#[derive(Debug, Clone)]
pub struct FwOutcome {
    pub action: SplitAction,
    /// Number of steps taken.
    pub iterations: usize,
    /// Whether a stopping rule fired before `max_iters`.
    pub converged: bool,
}

/// Runs Frank-Wolfe from `start`, calling `gradient` at every iterate and
/// `observe` on every iterate including the start.
pub fn fw_solve_observed<G, O>(
    mut gradient: G,
    space: &BlockSimplexSpace,
    config: &FwConfig,
    start: SplitAction,
    mut observe: O,
) -> Result<FwOutcome>
where
    G: FnMut(&SplitAction) -> Result<Vec<f64>>,
    O: FnMut(usize, &SplitAction),
{
    config.validate()?;
    space.validate(start.values())?;
    let mut x = start;
    observe(0, &x);
    for k in 0..config.max_iters {
        let g = gradient(&x)?;
        space.check_dim(g.len())?;
        if g.iter().all(|v| v.abs() < config.zero_gradient) {
            return Ok(FwOutcome { action: x, iterations: k, converged: true });
        }
        let z = lp_vertex(&g, space)?;
        if z.distance(&x) < config.distance_tolerance {
            return Ok(FwOutcome { action: x, iterations: k, converged: true });
        }
        x = fw_step(&x, &z, k)?;
        observe(k + 1, &x);
    }
    Ok(FwOutcome {
        action: x,
        iterations: config.max_iters,
        converged: false,
    })
}

pub fn fw_solve<G>(gradient: G, space: &BlockSimplexSpace, config: &FwConfig, start: SplitAction) -> Result<FwOutcome>
where
    G: FnMut(&SplitAction) -> Result<Vec<f64>>,
{
    fw_solve_observed(gradient, space, config, start, |_, _| {})
}

/// One uniformly distributed point of every block's simplex.
pub fn sample_feasible<R: Rng + ?Sized>(space: &BlockSimplexSpace, rng: &mut R) -> SplitAction {
    let mut values = vec![0.0; space.dim()];
    for b in 0..space.n_blocks() {
        let block = &mut values[space.block_range(b)];
        if block.len() == 1 {
            block[0] = 1.0;
            continue;
        }
        for v in block.iter_mut() {
            *v = rng.sample::<f64, _>(Exp1);
        }
        let sum: f64 = block.iter().sum();
        for v in block.iter_mut() {
            *v /= sum;
        }
    }
    SplitAction::from_vec_unchecked(values)
}

pub fn random_feasible_with<R: Rng + ?Sized>(space: &BlockSimplexSpace, rng: &mut R, count: usize) -> Vec<SplitAction> {
    (0..count).map(|_| sample_feasible(space, rng)).collect()
}

/// `count` independent uniform points of the polytope, reproducible under `seed`.
pub fn random_feasible(space: &BlockSimplexSpace, seed: u64, count: usize) -> Vec<SplitAction> {
    random_feasible_with(space, &mut ChaCha8Rng::seed_from_u64(seed), count)
}

/// Per-block softmax. Entries are kept strictly positive.
pub fn softmax_blocks(logits: &[f64], space: &BlockSimplexSpace) -> Result<SplitAction> {
    space.check_dim(logits.len())?;
    let mut out = vec![0.0; logits.len()];
    for b in 0..space.n_blocks() {
        let range = space.block_range(b);
        let block = &logits[range.clone()];
        let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dst = &mut out[range];
        let mut sum = 0.0;
        for (d, v) in dst.iter_mut().zip(block) {
            *d = (v - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d = (*d / sum).max(f64::MIN_POSITIVE);
        }
    }
    Ok(SplitAction::from_vec_unchecked(out))
}

/// Pulls a gradient with respect to softmax outputs back to the logits:
/// `dL/dv_c = a_c (g_c - sum_block a g)`.
pub fn softmax_blocks_backward(probs: &[f64], grad: &[f64], space: &BlockSimplexSpace) -> Vec<f64> {
    let mut out = vec![0.0; probs.len()];
    for b in 0..space.n_blocks() {
        let range = space.block_range(b);
        let dot: f64 = probs[range.clone()]
            .iter()
            .zip(&grad[range.clone()])
            .map(|(a, g)| a * g)
            .sum();
        for c in range {
            out[c] = probs[c] * (grad[c] - dot);
        }
    }
    out
}
