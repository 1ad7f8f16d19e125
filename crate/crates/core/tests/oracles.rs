//! Cross-checks against brute-force computations that share no code with
//! the library paths they test.

use std::sync::Arc;

use orlicz_fem::femcore::{FeFunction, WeightedQuadrature};
use orlicz_fem::mesh::{Pattern, SimplicialMesh};
use orlicz_fem::study::quasinorm_error;
use orlicz_fem::weight::Weight;
use orlicz_fem::NFunction;

fn unit(n: usize) -> Arc<SimplicialMesh> {
    Arc::new(SimplicialMesh::structured_rect(n, n, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross).unwrap())
}

/// Centroid rule on the `4^k` congruent subtriangles of a triangle.
fn subdivided_centroid_rule(p: [[f64; 2]; 3], k: u32, f: &impl Fn([f64; 2]) -> f64) -> f64 {
    if k == 0 {
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
        let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        return area * f(c);
    }
    let mid = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let (m01, m12, m20) = (mid(p[0], p[1]), mid(p[1], p[2]), mid(p[2], p[0]));
    [[p[0], m01, m20], [m01, p[1], m12], [m20, m12, p[2]], [m01, m12, m20]]
        .iter()
        .map(|t| subdivided_centroid_rule(*t, k - 1, f))
        .sum()
}

#[test]
fn quasinorm_error_matches_brute_force_quadrature() {
    let pi = std::f64::consts::PI;
    let grad = |x: [f64; 2]| [pi * (pi * x[0]).cos() * (pi * x[1]).sin(), pi * (pi * x[0]).sin() * (pi * x[1]).cos()];
    let m = unit(4);
    let u = FeFunction::interpolate(&m, |x| (pi * x[0]).sin() * (pi * x[1]).sin());
    for (w, phi) in [
        (Weight::one(), NFunction::power(2.0).unwrap()),
        (Weight::one(), NFunction::shifted_power(1.5, 0.1).unwrap()),
        (Weight::radial_power([0.5, 0.5], 0.5), NFunction::power(3.0).unwrap()),
    ] {
        let q = WeightedQuadrature::new(&m, &w, 8);
        let lib = quasinorm_error(&phi, &q, &grad, &u);
        let mut total = 0.0;
        for c in 0..m.num_cells() {
            let gh = u.gradient(c);
            let f = |x: [f64; 2]| {
                let a = phi.vector_v(&grad(x));
                let b = phi.vector_v(&gh);
                w.eval(x) * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            };
            total += subdivided_centroid_rule(m.cell_points(c), 6, &f);
        }
        let oracle = total.sqrt();
        assert!((lib - oracle).abs() <= 1e-3 * oracle, "{phi:?}: {lib} vs {oracle}");
    }
}

#[test]
fn element_patches_match_pairwise_search() {
    let m = SimplicialMesh::structured_rect(3, 4, [0.0, 1.0, 0.0, 1.0], Pattern::Diagonal)
        .unwrap()
        .refine_uniform()
        .mesh;
    for t in 0..m.num_cells() {
        let brute: Vec<usize> = (0..m.num_cells())
            .filter(|&s| m.cells()[s].iter().any(|v| m.cells()[t].contains(v)))
            .collect();
        assert_eq!(m.patch_of_element(t), brute);
    }
}

/// `∫_{[0,1]²} |x − c|^α` for the centre `c`, as a one-dimensional polar
/// integral `8/(α+2) ∫_0^{π/4} (2 cos θ)^{−(α+2)} dθ`.
fn centred_power_mass(alpha: f64) -> f64 {
    let n = 2000;
    let b = std::f64::consts::FRAC_PI_4;
    let f = |th: f64| (2.0 * th.cos()).powf(-(alpha + 2.0));
    let h = b / n as f64;
    let mut s = f(0.0) + f(b);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    8.0 / (alpha + 2.0) * s * h / 3.0
}

#[test]
fn weighted_measure_matches_polar_integral() {
    let m = unit(8);
    for (alpha, tol) in [(0.5, 1e-6), (1.0 / 3.0, 1e-6), (-1.0, 5e-3)] {
        let q = WeightedQuadrature::new(&m, &Weight::radial_power([0.5, 0.5], alpha), 6);
        let exact = centred_power_mass(alpha);
        let err = (q.total_omega() - exact).abs() / exact;
        println!("alpha {alpha}: rel err {err:.2e}");
        assert!(err <= tol, "alpha {alpha}: {} vs {exact}", q.total_omega());
    }
}
