//! A single obstacle solve with a primal-dual active set method.

use orlicz_fem::solve::{solve_obstacle, SolveReport};
use orlicz_fem::study::builtin_case;

fn main() -> orlicz_fem::Result<()> {
    let mut case = builtin_case("obstacle_p2").expect("built-in case");
    case.base_resolution = 16;
    let problem = case.problem()?;
    let mesh = std::sync::Arc::new(case.base_mesh()?);
    let disc = problem.spec.discretize(&mesh, case.quad_degree);
    let sol = solve_obstacle(&problem.spec, &disc, &case.solver, None)?;
    let report = SolveReport::from_obstacle(&sol);
    println!(
        "converged {} after {} cycles, active set sizes {:?}",
        sol.converged, sol.cycles, sol.active_sizes
    );
    println!(
        "feasibility {:.2e}, complementarity {:.2e}, max multiplier {:.4e}",
        report.feasibility_violation.unwrap_or(0.0),
        report.complementarity.unwrap_or(0.0),
        report.max_multiplier.unwrap_or(0.0)
    );
    Ok(())
}
