//! Structured meshes, red refinement and shape regularity.

use orlicz_fem::mesh::{Pattern, SimplicialMesh};

fn main() -> orlicz_fem::Result<()> {
    let base = SimplicialMesh::structured_rect(4, 4, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross)?;
    let mut mesh = base.clone();
    println!("{:>5} {:>8} {:>8} {:>10} {:>8}", "level", "cells", "verts", "h", "sigma");
    for level in 0..5 {
        let s = mesh.shape_metrics();
        println!("{level:>5} {:>8} {:>8} {:>10.4e} {:>8.4}", mesh.num_cells(), mesh.num_vertices(), s.h, s.sigma);
        mesh = mesh.refine_uniform().mesh;
    }

    let star = base.inscribed_ball(base.interior_vertices()[0])?;
    println!("vertex {} star: {} cells, inscribed radius {:.4}", star.vertex, star.cells.len(), star.radius);
    println!("euler characteristic {}", base.euler_characteristic());
    Ok(())
}
