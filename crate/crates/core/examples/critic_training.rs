//! Fits a critic to a known cost surface, then lets CORL-FW act on it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tomosplit::agents::{ActionSearch, CorlAgent, CorlConfig, Transition};
use tomosplit::env::BlockSimplexSpace;
use tomosplit::fw::sample_feasible;

fn main() -> tomosplit::Result<()> {
    let space = BlockSimplexSpace::uniform(1, 3)?;
    let best = [0.6, 0.3, 0.1];
    let cost = |a: &[f64]| 0.1 + a.iter().zip(best).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let config = CorlConfig { hidden: vec![64, 64], net_lr: 0.003, tau: 0.05, ..CorlConfig::for_search(ActionSearch::FrankWolfe) };
    let mut agent = CorlAgent::new(space.clone(), 1, ActionSearch::FrankWolfe, config, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for step in 0..=3000 {
        let a = sample_feasible(&space, &mut rng);
        let c = cost(a.values());
        let loss = agent.learn(Transition::new(vec![1.0], a, c)?)?;
        if step % 500 == 0 {
            println!("step {step:>4}: minibatch loss {loss:.2e}");
        }
    }
    let a = agent.select_action(&[1.0])?;
    println!("chosen split {:?}, true cost {:.5} (optimum 0.1)", a.values(), cost(a.values()));
    Ok(())
}
