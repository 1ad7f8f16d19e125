//! Weighted modulars and Luxemburg norms of finite element gradients.

use std::sync::Arc;

use orlicz_fem::femcore::{FeFunction, ModularSamples, WeightedQuadrature};
use orlicz_fem::mesh::{Pattern, SimplicialMesh};
use orlicz_fem::weight::Weight;
use orlicz_fem::NFunction;

fn main() -> orlicz_fem::Result<()> {
    let mesh = Arc::new(SimplicialMesh::structured_rect(16, 16, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross)?);
    let v = FeFunction::interpolate(&mesh, |x| (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).sqrt());
    for w in [Weight::one(), Weight::radial_power([0.5, 0.5], 0.5)] {
        let q = WeightedQuadrature::new(&mesh, &w, 6);
        let g = ModularSamples::gradient(&q, &v);
        for phi in [NFunction::power(2.0)?, NFunction::power(3.0)?, NFunction::shifted_power(1.5, 1.0)?] {
            println!(
                "ω(Ω) = {:.4}, {phi:?}: modular {:.6e}, Luxemburg {:.6e}",
                q.total_omega(),
                g.modular(&phi),
                g.luxemburg(&phi)?
            );
        }
    }
    Ok(())
}
