//! Shifted N-functions, their conjugates and the Young inequality.

use orlicz_fem::nfunc::log_grid;
use orlicz_fem::NFunction;

fn main() -> orlicz_fem::Result<()> {
    let phi = NFunction::shifted_power(1.5, 1.0)?;
    let conj = phi.conjugate();
    let (lower, upper) = phi.characteristics();
    println!("{phi:?}: t φ''/φ' in [{lower:.3}, {upper:.3}]");

    let d2 = phi.estimate_delta2();
    let idx = phi.estimate_indices();
    println!("Δ₂ constant {:.4}, indices [{:.4}, {:.4}]", d2.value, idx.i_lower, idx.i_upper);

    println!("{:>10} {:>14} {:>14} {:>14}", "t", "Φ(t)", "Φ*(t)", "Φ_10(t)");
    let shifted = phi.shift(10.0)?;
    for t in log_grid(1e-2, 1e2, 5) {
        println!("{t:>10.3e} {:>14.6e} {:>14.6e} {:>14.6e}", phi.phi(t), conj.phi(t), shifted.phi(t));
    }

    // equality in Young's inequality at t = Φ'(s)
    for s in [0.1, 1.0, 10.0] {
        let t = phi.dphi(s);
        println!("s = {s}: st = {:.12e}, Φ(s) + Φ*(t) = {:.12e}", s * t, phi.phi(s) + conj.phi(t));
    }

    let z = [0.3, -1.2];
    println!("A(z) = {:?}, V(z) = {:?}", phi.vector_a(&z), phi.vector_v(&z));
    Ok(())
}
