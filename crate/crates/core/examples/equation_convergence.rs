//! Convergence study for the weighted Φ-Laplacian with a manufactured
//! solution. Pass a built-in case name to run another one.

use orlicz_fem::study::{builtin_case, run_convergence};

fn main() -> orlicz_fem::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "p1.5_sine".into());
    let mut case = builtin_case(&name).expect("unknown case");
    case.levels = case.levels.min(4);
    let report = run_convergence(&case)?;
    print!("{}", report.to_csv());
    println!("EOC {:?}, passed {}", report.eoc, report.passed);
    Ok(())
}
