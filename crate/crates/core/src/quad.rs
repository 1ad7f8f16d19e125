//! Low-level quadrature: Gauss–Legendre nodes, adaptive Gauss–Kronrod on
//! intervals, and symmetric rules on the reference triangle.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one Gauss node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Splits the interval with the largest error estimate until the summed
/// estimate drops below `rel_tol * |I| + abs_tol` or the interval budget is
/// exhausted. Non-finite partial results are propagated unchanged.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    const MAX_INTERVALS: usize = 4000;
    let (r, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, r, e)];
    let mut total = r;
    let mut err = e;
    while err > rel_tol * total.abs() + abs_tol && intervals.len() < MAX_INTERVALS {
        if !total.is_finite() {
            return total;
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, r0, e0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine precision
            intervals.push((lo, hi, r0, 0.0));
            err -= e0;
            continue;
        }
        let (r1, e1) = gk15(&f, lo, mid);
        let (r2, e2) = gk15(&f, mid, hi);
        total += r1 + r2 - r0;
        err += e1 + e2 - e0;
        intervals.push((lo, mid, r1, e1));
        intervals.push((mid, hi, r2, e2));
    }
    // re-sum to shed the drift from incremental updates
    intervals.iter().map(|iv| iv.2).sum()
}

/// A quadrature rule on the reference triangle `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`.
///
/// Points are stored in barycentric form `(1 - ξ - η, ξ, η)`; weights sum to
/// the reference area `1/2`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub barycentric: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Rule exact for polynomials of total degree `degree`.
    ///
    /// Degree up to 6 uses the 12-point Dunavant rule; higher degrees use a
    /// collapsed (Duffy) tensor Gauss rule.
    pub fn triangle(degree: usize) -> Self {
        if degree <= 6 {
            Self::dunavant6()
        } else {
            Self::collapsed_gauss(degree)
        }
    }

    fn dunavant6() -> Self {
        let mut bary = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        let mut orbit3 = |a: f64, w: f64| {
            let b = 1.0 - 2.0 * a;
            for p in [[a, a, b], [a, b, a], [b, a, a]] {
                bary.push(p);
                weights.push(0.5 * w);
            }
        };
        orbit3(0.249286745170910, 0.116786275726379);
        orbit3(0.063089014491502, 0.050844906370207);
        let (a, b) = (0.053145049844817, 0.310352451033784);
        let c = 1.0 - a - b;
        let w = 0.082851075618374;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            bary.push(p);
            weights.push(0.5 * w);
        }
        // renormalise the tabulated 15-digit weights
        let s: f64 = weights.iter().sum();
        for w in &mut weights {
            *w *= 0.5 / s;
        }
        Self {
            barycentric: bary,
            weights,
            degree: 6,
        }
    }

    fn collapsed_gauss(degree: usize) -> Self {
        let n = (degree + 2).div_ceil(2);
        let g = gauss_legendre_on(n, 0.0, 1.0);
        let mut bary = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for &(u, wu) in &g {
            for &(v, wv) in &g {
                let xi = u;
                let eta = v * (1.0 - u);
                bary.push([1.0 - xi - eta, xi, eta]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        Self {
            barycentric: bary,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Quadrature nodes on a physical triangle, returned as barycentric
/// coordinates in that triangle together with physical weights.
///
/// When a point of `singular` lies in the closed triangle, the triangle is
/// first split into sub-triangles having that point as a vertex, and each
/// sub-triangle is refined `levels` times towards it (red refinement of the
/// corner child only).
pub fn triangle_nodes(
    tri: [[f64; 2]; 3],
    rule: &QuadratureRule,
    singular: &[[f64; 2]],
    levels: usize,
) -> Vec<([f64; 3], f64)> {
    let area = 0.5
        * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
            - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]));
    let bary_of = |x: [f64; 2]| -> [f64; 3] {
        let sa = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
        };
        [
            sa(x, tri[1], tri[2]) / area,
            sa(tri[0], x, tri[2]) / area,
            sa(tri[0], tri[1], x) / area,
        ]
    };
    let hit = singular
        .iter()
        .map(|&s| bary_of(s))
        .find(|b| b.iter().all(|&l| l >= -1e-12));
    let mut out = Vec::new();
    // sub-triangles in barycentric form; the first vertex is the singular corner
    let mut pieces: Vec<([[f64; 3]; 3], usize)> = Vec::new();
    let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    match hit {
        None => pieces.push((id, 0)),
        Some(b) => {
            let b = b.map(|l| l.max(0.0));
            for k in 0..3 {
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                // sub-triangle (s, v_i, v_j) has barycentric area b_k
                if b[k] > 1e-14 {
                    pieces.push(([b, id[i], id[j]], levels));
                }
            }
        }
    }
    while let Some((t, lv)) = pieces.pop() {
        let sub_area = area * det3(&t).abs();
        if lv == 0 {
            for (q, w) in rule.barycentric.iter().zip(&rule.weights) {
                let mut b = [0.0; 3];
                for (k, bk) in b.iter_mut().enumerate() {
                    *bk = q[0] * t[0][k] + q[1] * t[1][k] + q[2] * t[2][k];
                }
                out.push((b, 2.0 * w * sub_area));
            }
            continue;
        }
        let mid = |a: [f64; 3], c: [f64; 3]| [0.5 * (a[0] + c[0]), 0.5 * (a[1] + c[1]), 0.5 * (a[2] + c[2])];
        let (m01, m12, m20) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
        pieces.push(([t[0], m01, m20], lv - 1));
        pieces.push(([m01, t[1], m12], 0));
        pieces.push(([m20, m12, t[2]], 0));
        pieces.push(([m01, m12, m20], 0));
    }
    out
}

fn det3(t: &[[f64; 3]; 3]) -> f64 {
    t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) - t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0])
        + t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let rule = gauss_legendre_on(n, 0.0, 2.0);
            for k in 0..(2 * n) {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = 2f64.powi(k as i32 + 1) / (k as f64 + 1.0);
                assert!((q - exact).abs() < 1e-12 * exact, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 0.0);
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 4.0, 1e-10, 0.0);
        assert!((v - 4.0).abs() < 1e-8);
    }

    #[test]
    fn triangle_rules_exact_on_monomials() {
        for deg in [6, 8, 10] {
            let rule = QuadratureRule::triangle(deg);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 0.5).abs() < 1e-15);
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    let q: f64 = rule
                        .barycentric
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum();
                    let exact = factorial(a as u32) * factorial(b as u32)
                        / factorial((a + b + 2) as u32);
                    assert!((q - exact).abs() < 1e-13, "deg={deg} a={a} b={b}");
                }
            }
        }
        assert_eq!(QuadratureRule::triangle(6).len(), 12);
    }

    #[test]
    fn refined_triangle_nodes_integrate_radial_singularity() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let rule = QuadratureRule::triangle(6);
        let plain = triangle_nodes(tri, &rule, &[], 2);
        assert_eq!(plain.len(), 12);
        for sing in [[0.0, 0.0], [0.25, 0.25], [0.5, 0.0]] {
            let nodes = triangle_nodes(tri, &rule, &[sing], 2);
            let area: f64 = nodes.iter().map(|n| n.1).sum();
            assert!((area - 0.5).abs() < 1e-14);
            let lin: f64 = nodes.iter().map(|n| n.1 * n.0[1]).sum();
            assert!((lin - 1.0 / 6.0).abs() < 1e-14);
        }
        // ∫_T |x|^{-1/2} over the unit right triangle, by polar integration
        let exact = integrate(
            |th: f64| {
                let rho = 1.0 / (th.cos() + th.sin());
                rho.powf(1.5) / 1.5
            },
            0.0,
            std::f64::consts::FRAC_PI_2,
            1e-13,
            0.0,
        );
        let approx = |levels| {
            triangle_nodes(tri, &rule, &[[0.0, 0.0]], levels)
                .iter()
                .map(|(b, w)| w * (b[1] * b[1] + b[2] * b[2]).powf(-0.25))
                .sum::<f64>()
        };
        let e0 = (approx(0) - exact).abs();
        let e2 = (approx(2) - exact).abs();
        assert!(e2 < 0.3 * e0, "{e0} {e2}");
    }
}
