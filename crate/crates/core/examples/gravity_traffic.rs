//! Gravity traffic: mean matrix, per-step perturbation and utilization scaling.

use tomosplit::netsim::{Network, RandomTopology};
use tomosplit::traffic::{gravity_mean_tm, max_utilization, perturb_tm, sample_gravity_params, scale_to_utilization};

fn main() -> tomosplit::Result<()> {
    let net = Network::new(RandomTopology { nodes: 8, extra_edges: 6, ..Default::default() }.generate(1)?);
    let params = sample_gravity_params(8, 1.0, 2)?;
    let mean = gravity_mean_tm(&params);
    println!("mean total demand {:.3}, plain ECMP max utilization {:.3}", mean.total(), max_utilization(&mean, &net)?);
    let (scaled, factor) = scale_to_utilization(&mean, &net, 0.9)?;
    println!("scaled by {factor:.3}: max utilization {:.3}", max_utilization(&scaled, &net)?);
    let params = params.scaled(factor);
    for t in 0..5 {
        let tm = perturb_tm(&params, 3, t);
        println!("step {t}: total {:.4}, T[0][1] = {:.4}", tm.total(), tm.get(0, 1));
    }
    Ok(())
}
