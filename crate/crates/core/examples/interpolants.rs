//! Scott-Zhang and positivity-preserving interpolation, with the level
//! stability of their local ratio tables.

use std::sync::Arc;

use orlicz_fem::interp::{level_spread, stability_ratio_report, PpInterpolant, RatioKind, SzOperator, TestBank};
use orlicz_fem::mesh::{Pattern, SimplicialMesh};
use orlicz_fem::weight::Weight;
use orlicz_fem::NFunction;

fn main() -> orlicz_fem::Result<()> {
    let base = Arc::new(SimplicialMesh::structured_rect(4, 4, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross)?);
    let sz = SzOperator::new(&base);
    let pp = PpInterpolant::new(&base);
    println!("SZ dual basis defect {:.2e}, ℘_h ball area defect {:.2e}", sz.dual_basis_defect(), pp.area_defect());

    let bump = |x: [f64; 2]| (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])).max(0.0).sqrt();
    let min = pp.apply_fn(bump).values().iter().copied().fold(f64::INFINITY, f64::min);
    println!("min of ℘_h applied to a nonnegative bump: {min:.3e}");

    let phi = NFunction::power(1.5)?;
    let w = Weight::radial_power([0.5, 0.5], 0.5);
    let bank = TestBank::unit_square(&base, 7);
    for kind in RatioKind::ALL {
        let rows = stability_ratio_report(kind, &phi, &w, &bank, &base, 3, 6);
        for r in &rows {
            println!("{:<22} level {} h {:.4} max {:.4} median {:.4}", kind.name(), r.level, r.h, r.max_ratio, r.median_ratio);
        }
        println!("{:<22} level spread {:.3}", kind.name(), level_spread(&rows));
    }
    Ok(())
}
