//! Weights and numerical membership diagnostics for the Muckenhoupt-type
//! classes `A_p`, `A_p(Ω)`, `A_Φ` and `B_Φ`.
//!
//! Suprema "over all balls" are replaced by a seeded [`BallSampler`]. Ball
//! integrals that contain a weight singularity are computed in polar
//! coordinates around the singularity with a log-graded radial variable that
//! is truncated at three nested cut-off radii; the behaviour of the integral
//! as the cut-off shrinks drives the growth flags.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::{point_segment_distance, Point, SimplicialMesh};
use crate::nfunc::NFunction;
use crate::quad::{self, QuadratureRule};

/// Default floor on `|x − center|` for radial powers.
pub const RADIAL_FLOOR: f64 = 1e-14;

/// Relative cut-off radii around a singular point (coarse, middle, fine).
pub const CUTOFFS: [f64; 3] = [1e-5, 3.162_277_660_168_379_5e-9, 1e-12];

type PointFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Constant(f64),
    RadialPower { center: Point, alpha: f64, floor: f64 },
    Product(Vec<Weight>),
    Pow { base: Weight, s: f64 },
    Custom { name: String, f: PointFn, singular: Vec<Point> },
}

/// A positive weight function on the plane.
#[derive(Clone)]
pub struct Weight(Arc<Kind>);

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Kind::Constant(c) => write!(f, "Constant({c})"),
            Kind::RadialPower { center, alpha, .. } => {
                write!(f, "RadialPower({center:?}, {alpha})")
            }
            Kind::Product(ws) => write!(f, "Product({ws:?})"),
            Kind::Pow { base, s } => write!(f, "Pow({base:?}, {s})"),
            Kind::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Weight {
    pub fn constant(c: f64) -> Self {
        assert!(c > 0.0, "weights must be positive");
        Weight(Arc::new(Kind::Constant(c)))
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `|x − center|^α`, with `|x − center|` floored at [`RADIAL_FLOOR`].
    pub fn radial_power(center: Point, alpha: f64) -> Self {
        Self::radial_power_with_floor(center, alpha, RADIAL_FLOOR)
    }

    pub fn radial_power_with_floor(center: Point, alpha: f64, floor: f64) -> Self {
        if alpha == 0.0 {
            return Self::one();
        }
        Weight(Arc::new(Kind::RadialPower { center, alpha, floor }))
    }

    pub fn product(factors: Vec<Weight>) -> Self {
        Weight(Arc::new(Kind::Product(factors)))
    }

    pub fn custom<F>(name: &str, f: F, singular: Vec<Point>) -> Self
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        Weight(Arc::new(Kind::Custom {
            name: name.into(),
            f: Arc::new(f),
            singular,
        }))
    }

    /// `ω^s`.
    pub fn powf(&self, s: f64) -> Weight {
        match &*self.0 {
            Kind::Constant(c) => Weight::constant(c.powf(s)),
            Kind::RadialPower { center, alpha, floor } => {
                Weight::radial_power_with_floor(*center, alpha * s, *floor)
            }
            Kind::Product(ws) => Weight::product(ws.iter().map(|w| w.powf(s)).collect()),
            Kind::Pow { base, s: s0 } => Weight(Arc::new(Kind::Pow { base: base.clone(), s: s0 * s })),
            Kind::Custom { .. } => Weight(Arc::new(Kind::Pow { base: self.clone(), s })),
        }
    }

    pub fn eval(&self, x: Point) -> f64 {
        match &*self.0 {
            Kind::Constant(c) => *c,
            Kind::RadialPower { center, alpha, floor } => {
                let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                r.max(*floor).powf(*alpha)
            }
            Kind::Product(ws) => ws.iter().map(|w| w.eval(x)).product(),
            Kind::Pow { base, s } => base.eval(x).powf(*s),
            Kind::Custom { f, .. } => f(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        match &*self.0 {
            Kind::Constant(_) => true,
            Kind::Product(ws) => ws.iter().all(Weight::is_constant),
            Kind::Pow { base, .. } => base.is_constant(),
            _ => false,
        }
    }

    /// Points where the weight may vanish or blow up.
    pub fn singular_points(&self) -> Vec<Point> {
        let mut out = Vec::new();
        self.collect_singular(&mut out);
        out.dedup();
        out
    }

    fn collect_singular(&self, out: &mut Vec<Point>) {
        match &*self.0 {
            Kind::Constant(_) => {}
            Kind::RadialPower { center, .. } => out.push(*center),
            Kind::Product(ws) => ws.iter().for_each(|w| w.collect_singular(out)),
            Kind::Pow { base, .. } => base.collect_singular(out),
            Kind::Custom { singular, .. } => out.extend(singular.iter().copied()),
        }
    }

    /// `ω(region) = Σ_T ∫_T ω` over the listed cells.
    pub fn measure(&self, mesh: &SimplicialMesh, region: &[usize]) -> f64 {
        let rule = QuadratureRule::triangle(6);
        let sing = self.singular_points();
        region
            .iter()
            .map(|&c| {
                let tri = mesh.cell_points(c);
                quad::triangle_nodes(tri, &rule, &sing, 2)
                    .iter()
                    .map(|(b, w)| w * self.eval(mesh.map_point(c, b)))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Serializable weight description used by problem files and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Constant { value: f64 },
    RadialPower { center: Point, alpha: f64 },
    Product { factors: Vec<WeightSpec> },
}

impl WeightSpec {
    pub fn build(&self) -> Weight {
        match self {
            WeightSpec::Constant { value } => Weight::constant(*value),
            WeightSpec::RadialPower { center, alpha } => Weight::radial_power(*center, *alpha),
            WeightSpec::Product { factors } => {
                Weight::product(factors.iter().map(WeightSpec::build).collect())
            }
        }
    }
}

/// Integrals over one ball at the three cut-off levels of [`CUTOFFS`].
#[derive(Clone, Debug)]
pub struct BallIntegrals {
    pub area: [f64; 3],
    pub values: Vec<[f64; 3]>,
}

/// Tail behaviour of a cut-off integral as the cut-off radius shrinks.
#[derive(Clone, Copy, Debug)]
pub struct TailEstimate {
    /// Extrapolated limit (the finest value if the tail does not converge).
    pub value: f64,
    pub divergent: bool,
}

/// Geometric extrapolation of `v(ε)` from three equally log-spaced cut-offs.
pub fn tail_extrapolate(v: [f64; 3]) -> TailEstimate {
    if v.iter().any(|x| !x.is_finite()) {
        return TailEstimate {
            value: f64::INFINITY,
            divergent: true,
        };
    }
    let d1 = v[1] - v[0];
    let d2 = v[2] - v[1];
    let scale = v[2].abs().max(f64::MIN_POSITIVE);
    if d2.abs() <= 1e-9 * scale {
        return TailEstimate {
            value: v[2],
            divergent: false,
        };
    }
    let q = d2 / d1;
    if d1 > 0.0 && (0.0..0.7).contains(&q) {
        TailEstimate {
            value: v[2] + d2 * q / (1.0 - q),
            divergent: false,
        }
    } else {
        TailEstimate {
            value: v[2],
            divergent: q >= 0.7,
        }
    }
}

/// Polar product quadrature on discs.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    /// Radial Gauss points for balls without a singularity.
    pub radial: usize,
    /// Angular trapezoid points.
    pub angular: usize,
    /// Gauss points per unit panel of the log-graded radial variable.
    pub panel_gauss: usize,
}

impl Default for BallQuadrature {
    fn default() -> Self {
        Self {
            radial: 32,
            angular: 64,
            panel_gauss: 8,
        }
    }
}

impl BallQuadrature {
    /// Integrals of each `f` over the disc `B(center, radius)`.
    ///
    /// If `singular` lies strictly inside the disc, the integrals are taken in
    /// polar coordinates around it, excluding the inner discs of relative
    /// radius [`CUTOFFS`]`[k]` at level `k`.
    pub fn integrate(
        &self,
        center: Point,
        radius: f64,
        singular: Option<Point>,
        fs: &[&dyn Fn(Point) -> f64],
    ) -> BallIntegrals {
        let mut area = [0.0; 3];
        let mut values = vec![[0.0; 3]; fs.len()];
        let dth = 2.0 * PI / self.angular as f64;
        let inside = singular.filter(|s| {
            let d = ((s[0] - center[0]).powi(2) + (s[1] - center[1]).powi(2)).sqrt();
            d < radius * (1.0 - 1e-9)
        });
        match inside {
            None => {
                let rad = quad::gauss_legendre_on(self.radial, 0.0, radius);
                let mut acc = vec![0.0; fs.len()];
                let mut a = 0.0;
                for k in 0..self.angular {
                    let th = (k as f64 + 0.5) * dth;
                    let (c, s) = (th.cos(), th.sin());
                    for &(r, w) in &rad {
                        let x = [center[0] + r * c, center[1] + r * s];
                        let wt = w * r * dth;
                        a += wt;
                        for (j, f) in fs.iter().enumerate() {
                            acc[j] += wt * f(x);
                        }
                    }
                }
                area = [a; 3];
                for (v, s) in values.iter_mut().zip(acc) {
                    *v = [s; 3];
                }
            }
            Some(s) => {
                let d = [s[0] - center[0], s[1] - center[1]];
                let dd = d[0] * d[0] + d[1] * d[1];
                let breaks: Vec<f64> = CUTOFFS.iter().map(|e| -e.ln()).collect();
                let mut panels: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
                let mut lo = 0.0;
                for (lvl, &hi) in breaks.iter().enumerate() {
                    let n = ((hi - lo) as f64).ceil() as usize;
                    for i in 0..n {
                        let a = lo + (hi - lo) * i as f64 / n as f64;
                        let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
                        panels.push((lvl, quad::gauss_legendre_on(self.panel_gauss, a, b)));
                    }
                    lo = hi;
                }
                for k in 0..self.angular {
                    let th = (k as f64 + 0.5) * dth;
                    let e = [th.cos(), th.sin()];
                    let de = d[0] * e[0] + d[1] * e[1];
                    let rho = -de + (de * de - dd + radius * radius).sqrt();
                    for (lvl, pts) in &panels {
                        let mut a = 0.0;
                        let mut acc = vec![0.0; fs.len()];
                        for &(u, w) in pts {
                            let r = rho * (-u).exp();
                            let x = [s[0] + r * e[0], s[1] + r * e[1]];
                            let wt = w * r * r * dth;
                            a += wt;
                            for (j, f) in fs.iter().enumerate() {
                                acc[j] += wt * f(x);
                            }
                        }
                        for l in *lvl..3 {
                            area[l] += a;
                            for j in 0..fs.len() {
                                values[j][l] += acc[j];
                            }
                        }
                    }
                }
            }
        }
        BallIntegrals { area, values }
    }
}

/// Seeded family of test balls replacing "for every ball".
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallSampler {
    /// `[x0, x1, y0, y1]`.
    pub bbox: [f64; 4],
    pub n_balls: usize,
    /// Radii are log-spaced over `[r_min_factor, r_max_factor] · diam(bbox)`.
    pub r_min_factor: f64,
    pub r_max_factor: f64,
    /// Extra balls centred at each singular point of the weight.
    pub singular_balls: usize,
    pub seed: u64,
}

impl BallSampler {
    pub fn new(bbox: [f64; 4], seed: u64) -> Self {
        Self {
            bbox,
            n_balls: 500,
            r_min_factor: 1e-3,
            r_max_factor: 1.0,
            singular_balls: 12,
            seed,
        }
    }

    pub fn with_balls(mut self, n: usize) -> Self {
        self.n_balls = n;
        self
    }

    pub fn diameter(&self) -> f64 {
        let [x0, x1, y0, y1] = self.bbox;
        ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
    }

    /// Ball list `(center, radius)`: random balls first, then singular-centred ones.
    pub fn balls(&self, singular: &[Point]) -> Vec<(Point, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let diam = self.diameter();
        let radius = |i: usize, n: usize| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 1.0 };
            let (a, b) = (self.r_min_factor.ln(), self.r_max_factor.ln());
            diam * (a + (b - a) * t).exp()
        };
        let [x0, x1, y0, y1] = self.bbox;
        let mut out = Vec::with_capacity(self.n_balls + singular.len() * self.singular_balls);
        for i in 0..self.n_balls {
            let c = [rng.random_range(x0..=x1), rng.random_range(y0..=y1)];
            out.push((c, radius(i, self.n_balls)));
        }
        for s in singular {
            for i in 0..self.singular_balls {
                out.push((*s, radius(i, self.singular_balls)));
            }
        }
        out
    }
}

/// Result of [`ap_characteristic`].
#[derive(Clone, Debug, Serialize)]
pub struct ApDiagnostics {
    pub p: f64,
    /// Supremum of the `A_p` product with singular tails extrapolated.
    pub characteristic: f64,
    /// Suprema at the coarse and fine singular cut-offs.
    pub coarse_sup: f64,
    pub fine_sup: f64,
    /// Some ball integral failed to converge as the cut-off shrank.
    pub tail_divergent: bool,
    pub growth_flag: bool,
    pub argmax_center: Point,
    pub argmax_radius: f64,
    pub n_balls: usize,
}

fn first_singular_in(sing: &[Point], c: Point, r: f64) -> Option<Point> {
    sing.iter()
        .copied()
        .find(|s| ((s[0] - c[0]).powi(2) + (s[1] - c[1]).powi(2)).sqrt() < r)
}

/// Sampled `[ω]_{A_p} = sup_B (⨍_B ω)(⨍_B ω^{−1/(p−1)})^{p−1}`.
pub fn ap_characteristic(w: &Weight, p: f64, sampler: &BallSampler) -> ApDiagnostics {
    ap_characteristic_with(w, p, sampler, &BallQuadrature::default())
}

pub fn ap_characteristic_with(
    w: &Weight,
    p: f64,
    sampler: &BallSampler,
    bq: &BallQuadrature,
) -> ApDiagnostics {
    assert!(p > 1.0, "A_p needs p > 1");
    let sing = w.singular_points();
    let balls = sampler.balls(&sing);
    let e = -1.0 / (p - 1.0);
    let per_ball: Vec<([f64; 3], f64, bool)> = balls
        .par_iter()
        .map(|&(c, r)| {
            let f1 = |x: Point| w.eval(x);
            let f2 = |x: Point| w.eval(x).powf(e);
            let bi = bq.integrate(c, r, first_singular_in(&sing, c, r), &[&f1, &f2]);
            let prod = |a: f64, i1: f64, i2: f64| (i1 / a) * (i2 / a).powf(p - 1.0);
            let lv: [f64; 3] =
                std::array::from_fn(|l| prod(bi.area[l], bi.values[0][l], bi.values[1][l]));
            let t_area = tail_extrapolate(bi.area);
            let t1 = tail_extrapolate(bi.values[0]);
            let t2 = tail_extrapolate(bi.values[1]);
            let extrap = prod(t_area.value, t1.value, t2.value);
            (lv, extrap, t1.divergent || t2.divergent)
        })
        .collect();
    let mut diag = ApDiagnostics {
        p,
        characteristic: 0.0,
        coarse_sup: 0.0,
        fine_sup: 0.0,
        tail_divergent: false,
        growth_flag: false,
        argmax_center: [0.0; 2],
        argmax_radius: 0.0,
        n_balls: balls.len(),
    };
    let mut nonfinite = false;
    for ((lv, ex, div), (c, r)) in per_ball.iter().zip(&balls) {
        if !ex.is_finite() || lv.iter().any(|v| !v.is_finite()) {
            nonfinite = true;
            continue;
        }
        diag.coarse_sup = diag.coarse_sup.max(lv[0]);
        diag.fine_sup = diag.fine_sup.max(lv[2]);
        diag.tail_divergent |= div;
        if *ex > diag.characteristic {
            diag.characteristic = *ex;
            diag.argmax_center = *c;
            diag.argmax_radius = *r;
        }
    }
    if nonfinite {
        diag.characteristic = f64::INFINITY;
    }
    diag.growth_flag =
        nonfinite || diag.tail_divergent || diag.fine_sup > 1.5 * diag.coarse_sup;
    diag
}

/// Smallest `p` on the grid whose sampled characteristic shows no growth.
pub fn smallest_finite_p(w: &Weight, sampler: &BallSampler, p_grid: &[f64]) -> Option<f64> {
    p_grid
        .iter()
        .copied()
        .find(|&p| !ap_characteristic(w, p, sampler).growth_flag)
}

/// Two independent `A_Φ` scores and their verdict.
#[derive(Clone, Debug, Serialize)]
pub struct APhiVerdict {
    /// Direct supremum over balls and `δ` of the defining expression.
    pub direct: f64,
    pub direct_growth: bool,
    /// `[ω]_{A_{i(Φ)}}` with the estimated lower index.
    pub indirect: ApDiagnostics,
    pub lower_index: f64,
    pub member: bool,
    /// The two scores disagree on the verdict.
    pub inconsistent: bool,
    pub delta_grid: Vec<f64>,
    /// Φ and Φ* both passed the Δ₂ estimate.
    pub delta2_ok: bool,
}

/// The 13-point log grid `1e-3 … 1e3`.
pub fn delta_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

pub fn is_a_phi(w: &Weight, phi: &NFunction, sampler: &BallSampler) -> APhiVerdict {
    is_a_phi_with(w, phi, sampler, &BallQuadrature::default())
}

pub fn is_a_phi_with(
    w: &Weight,
    phi: &NFunction,
    sampler: &BallSampler,
    bq: &BallQuadrature,
) -> APhiVerdict {
    let delta2_ok =
        !phi.estimate_delta2().divergent && !phi.conjugate().estimate_delta2().divergent;
    let idx = phi.estimate_indices();
    let sing = w.singular_points();
    let balls = sampler.balls(&sing);
    let deltas = delta_grid();
    let per_ball: Vec<(f64, bool)> = balls
        .par_iter()
        .map(|&(c, r)| {
            let fns: Vec<Box<dyn Fn(Point) -> f64 + Sync>> = deltas
                .iter()
                .flat_map(|&d| {
                    let a: Box<dyn Fn(Point) -> f64 + Sync> = Box::new(move |x| d * w.eval(x));
                    let b: Box<dyn Fn(Point) -> f64 + Sync> =
                        Box::new(move |x| phi.dphi_inverse(1.0 / (d * w.eval(x))));
                    [a, b]
                })
                .collect();
            let refs: Vec<&dyn Fn(Point) -> f64> =
                fns.iter().map(|f| f.as_ref() as &dyn Fn(Point) -> f64).collect();
            let bi = bq.integrate(c, r, first_singular_in(&sing, c, r), &refs);
            let area = tail_extrapolate(bi.area).value;
            let mut best = 0.0f64;
            let mut div = false;
            for k in 0..deltas.len() {
                let t1 = tail_extrapolate(bi.values[2 * k]);
                let t2 = tail_extrapolate(bi.values[2 * k + 1]);
                div |= t1.divergent || t2.divergent;
                let v = (t1.value / area) * phi.dphi(t2.value / area);
                best = if v.is_finite() { best.max(v) } else { f64::INFINITY };
            }
            (best, div)
        })
        .collect();
    let direct = per_ball.iter().map(|b| b.0).fold(0.0, f64::max);
    let direct_growth = !direct.is_finite() || per_ball.iter().any(|b| b.1);
    let indirect = ap_characteristic_with(w, idx.i_lower.max(1.0 + 1e-6), sampler, bq);
    let member = delta2_ok && !direct_growth && !indirect.growth_flag;
    APhiVerdict {
        direct,
        direct_growth,
        inconsistent: direct_growth != indirect.growth_flag,
        indirect,
        lower_index: idx.i_lower,
        member,
        delta_grid: deltas,
        delta2_ok,
    }
}

/// Result of [`check_b_phi`].
#[derive(Clone, Debug, Serialize)]
pub struct BPhiResult {
    /// Minimal sampled value of `(1/μ) ∫_B Φ*(μ/ω) ω`.
    pub value: f64,
    pub best_mu: f64,
    pub finite: bool,
    pub values: Vec<(f64, f64)>,
}

/// `B_Φ` test on a single ball over the log grid `μ ∈ 1e-6 … 1e6`.
pub fn check_b_phi(w: &Weight, phi: &NFunction, center: Point, radius: f64) -> BPhiResult {
    let conj = phi.conjugate();
    let mus: Vec<f64> = (0..13).map(|i| 10f64.powi(i - 6)).collect();
    let sing = w.singular_points();
    let bq = BallQuadrature {
        radial: 32,
        angular: 32,
        panel_gauss: 4,
    };
    let results: Vec<(f64, f64)> = mus
        .par_iter()
        .map(|&mu| {
            let f = |x: Point| {
                let wx = w.eval(x);
                conj.phi(mu / wx) * wx
            };
            let bi = bq.integrate(center, radius, first_singular_in(&sing, center, radius), &[&f]);
            let t = tail_extrapolate(bi.values[0]);
            let v = if t.divergent { f64::INFINITY } else { t.value / mu };
            (mu, v)
        })
        .collect();
    let (best_mu, value) = results
        .iter()
        .copied()
        .filter(|r| r.1.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((f64::NAN, f64::INFINITY));
    BPhiResult {
        value,
        best_mu,
        finite: value.is_finite(),
        values: results,
    }
}

/// Result of [`is_ap_omega`].
#[derive(Clone, Debug, Serialize)]
pub struct ApOmegaVerdict {
    pub member: bool,
    /// Sampled infimum of ω over the collar (the reported `ω_l`).
    pub omega_l: f64,
    pub coarse_inf: f64,
    pub sup: f64,
    /// Largest sampled difference quotient at the coarse and fine spacing.
    pub coarse_slope: f64,
    pub fine_slope: f64,
    pub collar_width: f64,
    pub ap: ApDiagnostics,
}

/// Checks the boundary-collar conditions of `A_p(Ω)` for the domain of `mesh`.
pub fn is_ap_omega(w: &Weight, mesh: &SimplicialMesh, p: f64, eps: f64, seed: u64) -> ApOmegaVerdict {
    let bbox = mesh.bounding_box();
    let ap = ap_characteristic(w, p, &BallSampler::new(bbox, seed));
    let sample = |spacing: f64| -> (f64, f64, f64) {
        let nx = ((bbox[1] - bbox[0]) / spacing).round().max(1.0) as usize;
        let ny = ((bbox[3] - bbox[2]) / spacing).round().max(1.0) as usize;
        let hx = (bbox[1] - bbox[0]) / nx as f64;
        let hy = (bbox[3] - bbox[2]) / ny as f64;
        let grid: Vec<Vec<Option<f64>>> = (0..=ny)
            .into_par_iter()
            .map(|j| {
                (0..=nx)
                    .map(|i| {
                        let x = [bbox[0] + i as f64 * hx, bbox[2] + j as f64 * hy];
                        let dist = mesh
                            .boundary_faces()
                            .iter()
                            .map(|f| {
                                point_segment_distance(x, mesh.vertices()[f[0]], mesh.vertices()[f[1]])
                            })
                            .fold(f64::INFINITY, f64::min);
                        (dist < eps && mesh.locate(x).is_some()).then(|| w.eval(x))
                    })
                    .collect()
            })
            .collect();
        let mut inf = f64::INFINITY;
        let mut sup = 0.0f64;
        let mut slope = 0.0f64;
        for j in 0..=ny {
            for i in 0..=nx {
                if let Some(v) = grid[j][i] {
                    inf = inf.min(v);
                    sup = sup.max(v);
                    if i < nx {
                        if let Some(u) = grid[j][i + 1] {
                            slope = slope.max((u - v).abs() / hx);
                        }
                    }
                    if j < ny {
                        if let Some(u) = grid[j + 1][i] {
                            slope = slope.max((u - v).abs() / hy);
                        }
                    }
                }
            }
        }
        (inf, sup, slope)
    };
    let (coarse_inf, _, coarse_slope) = sample(eps / 8.0);
    let (fine_inf, sup, fine_slope) = sample(eps / 32.0);
    let member = !ap.growth_flag
        && fine_inf.is_finite()
        && fine_inf > 1e-8 * sup
        && fine_inf >= 0.75 * coarse_inf
        && fine_slope <= 2.0 * coarse_slope + 1e-12;
    ApOmegaVerdict {
        member,
        omega_l: fine_inf,
        coarse_inf,
        sup,
        coarse_slope,
        fine_slope,
        collar_width: eps,
        ap,
    }
}

/// Result of the `check-weight` command.
#[derive(Clone, Debug, Serialize)]
pub struct WeightReport {
    pub characteristic: f64,
    pub growth_flag: bool,
    pub aphi_direct: f64,
    pub aphi_indirect: f64,
    pub bphi: f64,
    pub aphi_member: bool,
    pub aphi_inconsistent: bool,
    pub bphi_finite: bool,
}

/// All weight diagnostics for `(ω, Φ, p)` on the given sampler.
pub fn weight_report(w: &Weight, phi: &NFunction, p: f64, sampler: &BallSampler) -> Result<WeightReport> {
    let ap = ap_characteristic(w, p, sampler);
    let aphi = is_a_phi(w, phi, sampler);
    let [x0, x1, y0, y1] = sampler.bbox;
    let center = [0.5 * (x0 + x1), 0.5 * (y0 + y1)];
    let b = check_b_phi(w, phi, center, 0.5 * sampler.diameter());
    Ok(WeightReport {
        characteristic: ap.characteristic,
        growth_flag: ap.growth_flag,
        aphi_direct: aphi.direct,
        aphi_indirect: aphi.indirect.characteristic,
        bphi: b.value,
        aphi_member: aphi.member,
        aphi_inconsistent: aphi.inconsistent,
        bphi_finite: b.finite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Pattern;

    const SQ: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

    #[test]
    fn constant_weight_has_unit_characteristic() {
        let s = BallSampler::new(SQ, 1).with_balls(50);
        for p in [1.5, 2.0, 3.0] {
            let d = ap_characteristic(&Weight::constant(3.7), p, &s);
            assert!((d.characteristic - 1.0).abs() < 1e-12);
            assert!(!d.growth_flag);
        }
    }

    #[test]
    fn ball_quadrature_integrates_radial_powers() {
        let bq = BallQuadrature::default();
        // ∫_{B(0,R)} |x|^α = 2π R^{α+2}/(α+2)
        for alpha in [-1.5f64, -0.5, 0.5, 2.0] {
            let f = |x: Point| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(alpha);
            let bi = bq.integrate([0.0, 0.0], 0.5, Some([0.0, 0.0]), &[&f]);
            let exact = 2.0 * PI * 0.5f64.powf(alpha + 2.0) / (alpha + 2.0);
            let t = tail_extrapolate(bi.values[0]);
            assert!((t.value - exact).abs() < 1e-9 * exact, "alpha={alpha}");
            assert!(!t.divergent);
        }
        // off-centre singularity
        let f = |x: Point| ((x[0] - 0.3).powi(2) + x[1] * x[1]).sqrt().powf(-1.0);
        let bi = bq.integrate([0.0, 0.0], 1.0, Some([0.3, 0.0]), &[&f]);
        let exact = quad::integrate(
            |th: f64| {
                let de = 0.3 * th.cos();
                -de + (de * de - 0.09 + 1.0).sqrt()
            },
            0.0,
            2.0 * PI,
            1e-13,
            0.0,
        );
        assert!((tail_extrapolate(bi.values[0]).value - exact).abs() < 1e-6 * exact);
        assert!((tail_extrapolate(bi.area).value - PI).abs() < 1e-9);
    }

    #[test]
    fn log_divergence_is_detected() {
        let bq = BallQuadrature::default();
        let f = |x: Point| 1.0 / (x[0] * x[0] + x[1] * x[1]);
        let bi = bq.integrate([0.0, 0.0], 1.0, Some([0.0, 0.0]), &[&f]);
        assert!(tail_extrapolate(bi.values[0]).divergent);
    }

    #[test]
    fn duality_of_characteristics() {
        let s = BallSampler::new(SQ, 7).with_balls(60);
        let p = 3.0;
        let w = Weight::radial_power([0.0, 0.0], 1.0);
        let a = ap_characteristic(&w, p, &s).characteristic;
        let dual = w.powf(-1.0 / (p - 1.0));
        let b = ap_characteristic(&dual, p / (p - 1.0), &s).characteristic;
        assert!((a - b.powf(p - 1.0)).abs() < 1e-9 * a, "{a} {b}");
    }

    #[test]
    fn power_weight_in_a2_is_stable() {
        let s = BallSampler::new(SQ, 3).with_balls(100);
        let d = ap_characteristic(&Weight::radial_power([0.0, 0.0], 1.0), 2.0, &s);
        assert!(!d.growth_flag && d.characteristic.is_finite() && d.characteristic >= 1.0);
        let d = ap_characteristic(&Weight::radial_power([0.0, 0.0], 2.5), 2.0, &s);
        assert!(d.growth_flag);
    }

    #[test]
    fn a_phi_scores_agree_for_power_functions() {
        let s = BallSampler::new(SQ, 5).with_balls(40);
        let phi = NFunction::power(2.0).unwrap();
        let w = Weight::radial_power([0.0, 0.0], 0.5);
        let v = is_a_phi(&w, &phi, &s);
        assert!(v.member && !v.inconsistent);
        assert!((v.direct / v.indirect.characteristic - 1.0).abs() < 0.2);
        let one = is_a_phi(&Weight::one(), &NFunction::shifted_power(3.0, 1.0).unwrap(), &s);
        assert!(one.member);
    }

    #[test]
    fn b_phi_for_constant_weight() {
        let phi = NFunction::power(2.0).unwrap();
        let r = check_b_phi(&Weight::one(), &phi, [0.0, 0.0], 1.0);
        assert!(r.finite && r.values.iter().all(|v| v.1.is_finite()));
        let bad = check_b_phi(&Weight::radial_power([0.0, 0.0], 3.0), &phi, [0.0, 0.0], 1.0);
        assert!(!bad.finite);
    }

    #[test]
    fn measure_of_unit_square() {
        let m = SimplicialMesh::structured_rect(4, 4, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross).unwrap();
        let all: Vec<usize> = (0..m.num_cells()).collect();
        assert!((Weight::one().measure(&m, &all) - 1.0).abs() < 1e-12);
        assert!((Weight::constant(2.5).measure(&m, &all) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn collar_verdicts() {
        let m = SimplicialMesh::structured_rect(4, 4, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross).unwrap();
        let v = is_ap_omega(&Weight::one(), &m, 2.0, 0.1, 0);
        assert!(v.member && (v.omega_l - 1.0).abs() < 1e-15);
        let v = is_ap_omega(&Weight::radial_power([0.5, 0.5], -0.5), &m, 2.0, 0.1, 0);
        assert!(v.member);
        let v = is_ap_omega(&Weight::radial_power([0.5, 0.0], 1.0), &m, 2.0, 0.1, 0);
        assert!(!v.member);
    }
}
