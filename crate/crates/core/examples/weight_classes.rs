//! Sampled Muckenhoupt characteristics of radial power weights.

use orlicz_fem::weight::{ap_characteristic, is_a_phi, BallSampler, Weight};
use orlicz_fem::NFunction;

fn main() -> orlicz_fem::Result<()> {
    let sampler = BallSampler::new([-1.0, 1.0, -1.0, 1.0], 0);
    println!("{:>6} {:>5} {:>14} {:>6}", "alpha", "p", "[w]_Ap", "grows");
    for alpha in [-1.5, -1.0, 0.0, 1.0, 1.9, 2.5] {
        for p in [1.5, 2.0, 3.0] {
            let d = ap_characteristic(&Weight::radial_power([0.0, 0.0], alpha), p, &sampler);
            println!("{alpha:>6} {p:>5} {:>14.4e} {:>6}", d.characteristic, d.growth_flag);
        }
    }

    let phi = NFunction::shifted_power(2.5, 0.5)?;
    let w = Weight::radial_power([0.0, 0.0], 0.5);
    let v = is_a_phi(&w, &phi, &sampler);
    println!(
        "|x|^0.5 with {phi:?}: direct {:.4}, via A_i(Φ) with i = {:.3}: {:.4}, member {}",
        v.direct, v.lower_index, v.indirect.characteristic, v.member
    );
    Ok(())
}
