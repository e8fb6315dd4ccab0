//! Frank-Wolfe on a product of simplices, printing the iterates.

use tomosplit::env::{BlockSimplexSpace, SplitAction};
use tomosplit::fw::{fw_solve_observed, FwConfig};

fn main() -> tomosplit::Result<()> {
    let space = BlockSimplexSpace::new(vec![2, 3])?;
    let target = [0.3, 0.7, 0.5, 0.5, -0.2];
    let grad = |x: &SplitAction| Ok(x.values().iter().zip(target).map(|(v, t)| 2.0 * (v - t)).collect());
    let out = fw_solve_observed(grad, &space, &FwConfig::default(), space.equal_split(), |k, x| {
        if k < 5 || k % 20 == 0 {
            println!("k = {k:>3}: {:?}", x.values().iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>());
        }
    })?;
    println!("stopped after {} iterations (converged: {}): {:?}", out.iterations, out.converged, out.action.values());
    Ok(())
}
