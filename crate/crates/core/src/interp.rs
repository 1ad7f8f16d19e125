//! The Scott–Zhang quasi-interpolant `Π_h` and the positivity-preserving
//! interpolant `℘_h`, plus per-element stability and approximation ratio
//! tables over a refinement sequence.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::femcore::{FeFunction, QuadNode, ScalarField, VectorField, WeightedQuadrature};
use crate::mesh::{Point, SimplicialMesh};
use crate::nfunc::NFunction;
use crate::quad;
use crate::weight::Weight;

/// The set a Scott–Zhang nodal value is averaged over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AveragingSet {
    Cell(usize),
    Face([usize; 2]),
}

/// Scott–Zhang operator with the lowest-index choice of averaging sets.
#[derive(Clone, Debug)]
pub struct SzOperator {
    mesh: Arc<SimplicialMesh>,
    sets: Vec<AveragingSet>,
    cell_rule: quad::QuadratureRule,
    edge_rule: Vec<(f64, f64)>,
}

impl SzOperator {
    pub fn new(mesh: &Arc<SimplicialMesh>) -> Self {
        let mut face_of = vec![None; mesh.num_vertices()];
        for f in mesh.boundary_faces() {
            for &v in f {
                if face_of[v].is_none() {
                    face_of[v] = Some(*f);
                }
            }
        }
        let sets = (0..mesh.num_vertices())
            .map(|v| {
                if mesh.is_boundary_vertex(v) {
                    AveragingSet::Face(face_of[v].expect("boundary vertex has a face"))
                } else {
                    AveragingSet::Cell(mesh.vertex_cells(v)[0])
                }
            })
            .collect();
        Self {
            mesh: mesh.clone(),
            sets,
            cell_rule: quad::QuadratureRule::triangle(8),
            edge_rule: quad::gauss_legendre_on(8, 0.0, 1.0),
        }
    }

    pub fn averaging_set(&self, v: usize) -> AveragingSet {
        self.sets[v]
    }

    fn apply_with<C, F>(&self, cell_eval: C, face_eval: F) -> FeFunction
    where
        C: Fn(usize, &[f64; 3], Point) -> f64 + Sync,
        F: Fn([usize; 2], f64, Point) -> f64 + Sync,
    {
        let mesh = &self.mesh;
        let values: Vec<f64> = (0..mesh.num_vertices())
            .into_par_iter()
            .map(|v| match self.sets[v] {
                AveragingSet::Cell(c) => {
                    let j = mesh.cells()[c].iter().position(|&w| w == v).unwrap();
                    // dual basis ψ_j = (3/|T|)(4λ_j − 1); reference weights sum to 1/2
                    self.cell_rule
                        .barycentric
                        .iter()
                        .zip(&self.cell_rule.weights)
                        .map(|(b, w)| {
                            let x = mesh.map_point(c, b);
                            2.0 * w * 3.0 * (4.0 * b[j] - 1.0) * cell_eval(c, b, x)
                        })
                        .sum::<f64>()
                }
                AveragingSet::Face(f) => {
                    let (pa, pb) = (mesh.vertices()[f[0]], mesh.vertices()[f[1]]);
                    // dual basis ψ_j = (2/L)(3λ_j − 1), λ for f[0] is 1 − s
                    self.edge_rule
                        .iter()
                        .map(|&(s, w)| {
                            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                            let lam = if v == f[0] { 1.0 - s } else { s };
                            w * 2.0 * (3.0 * lam - 1.0) * face_eval(f, s, x)
                        })
                        .sum()
                }
            })
            .collect();
        FeFunction::from_values(&self.mesh, values).expect("one value per vertex")
    }

    /// `Π_h f` for a pointwise-evaluable `f`.
    pub fn apply_fn(&self, f: impl Fn(Point) -> f64 + Sync) -> FeFunction {
        self.apply_with(|_, _, x| f(x), |_, _, x| f(x))
    }

    /// `Π_h u` for a P1 function on the same mesh.
    pub fn apply_fe(&self, u: &FeFunction) -> FeFunction {
        let vals = u.values();
        self.apply_with(
            |c, b, _| u.eval_bary(c, b),
            |f, s, _| (1.0 - s) * vals[f[0]] + s * vals[f[1]],
        )
    }

    /// `max |∫_{σ_v} ψ_v φ_w − δ_vw|` over vertices and the P1 basis of `σ_v`.
    pub fn dual_basis_defect(&self) -> f64 {
        let mesh = &self.mesh;
        let mut worst = 0.0f64;
        for v in 0..mesh.num_vertices() {
            let support: Vec<usize> = match self.sets[v] {
                AveragingSet::Cell(c) => mesh.cells()[c].to_vec(),
                AveragingSet::Face(f) => f.to_vec(),
            };
            for &w in &support {
                let mut e = vec![0.0; mesh.num_vertices()];
                e[w] = 1.0;
                let phi_w = FeFunction::from_values(mesh, e).unwrap();
                let vals = phi_w.values();
                let val = match self.sets[v] {
                    AveragingSet::Cell(c) => {
                        let j = mesh.cells()[c].iter().position(|&x| x == v).unwrap();
                        self.cell_rule
                            .barycentric
                            .iter()
                            .zip(&self.cell_rule.weights)
                            .map(|(b, wt)| 2.0 * wt * 3.0 * (4.0 * b[j] - 1.0) * phi_w.eval_bary(c, b))
                            .sum::<f64>()
                    }
                    AveragingSet::Face(f) => self
                        .edge_rule
                        .iter()
                        .map(|&(s, wt)| {
                            let lam = if v == f[0] { 1.0 - s } else { s };
                            wt * 2.0 * (3.0 * lam - 1.0) * ((1.0 - s) * vals[f[0]] + s * vals[f[1]])
                        })
                        .sum(),
                };
                let target = if v == w { 1.0 } else { 0.0 };
                worst = worst.max((val - target).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
struct BallNode {
    cell: usize,
    bary: [f64; 3],
    x: Point,
    /// Weight divided by the ball area, so the weights sum to one.
    w: f64,
}

/// The positivity-preserving interpolant: nodal averages over the inscribed
/// balls `B_v` of interior vertex stars, zero at boundary vertices.
///
/// Each ball is integrated sector by sector inside the star cells (radial
/// Gauss × angular Gauss per sector), so every node carries its cell.
#[derive(Clone, Debug)]
pub struct PpInterpolant {
    mesh: Arc<SimplicialMesh>,
    radii: Vec<f64>,
    balls: Vec<Vec<BallNode>>,
    /// Sum of the unnormalized ball weights divided by `π r_v²`.
    area_ratio: Vec<f64>,
}

impl PpInterpolant {
    pub fn new(mesh: &Arc<SimplicialMesh>) -> Self {
        Self::with_resolution(mesh, 16, 8)
    }

    pub fn with_resolution(mesh: &Arc<SimplicialMesh>, radial: usize, angular_per_sector: usize) -> Self {
        let rad = quad::gauss_legendre_on(radial, 0.0, 1.0);
        let ang = quad::gauss_legendre_on(angular_per_sector, 0.0, 1.0);
        let per_vertex: Vec<(f64, Vec<BallNode>, f64)> = (0..mesh.num_vertices())
            .into_par_iter()
            .map(|v| {
                let Ok(star) = mesh.inscribed_ball(v) else {
                    return (0.0, Vec::new(), 1.0);
                };
                let r = star.radius;
                let xv = star.center;
                let mut nodes = Vec::new();
                let mut total = 0.0;
                for &c in &star.cells {
                    let cell = mesh.cells()[c];
                    let i = cell.iter().position(|&w| w == v).unwrap();
                    let pa = mesh.vertices()[cell[(i + 1) % 3]];
                    let pb = mesh.vertices()[cell[(i + 2) % 3]];
                    let ta = (pa[1] - xv[1]).atan2(pa[0] - xv[0]);
                    let mut tb = (pb[1] - xv[1]).atan2(pb[0] - xv[0]);
                    // positively oriented cell: the sector runs counter-clockwise from a to b
                    while tb <= ta {
                        tb += 2.0 * std::f64::consts::PI;
                    }
                    let span = tb - ta;
                    for &(s, ws) in &ang {
                        let th = ta + s * span;
                        let (ct, st) = (th.cos(), th.sin());
                        for &(q, wq) in &rad {
                            let rr = q * r;
                            let x = [xv[0] + rr * ct, xv[1] + rr * st];
                            let w = ws * span * wq * r * rr;
                            total += w;
                            nodes.push(BallNode {
                                cell: c,
                                bary: mesh.barycentric(c, x),
                                x,
                                w,
                            });
                        }
                    }
                }
                for n in &mut nodes {
                    n.w /= total;
                }
                let ratio = total / (std::f64::consts::PI * r * r);
                (r, nodes, ratio)
            })
            .collect();
        let mut radii = Vec::with_capacity(per_vertex.len());
        let mut balls = Vec::with_capacity(per_vertex.len());
        let mut area_ratio = Vec::with_capacity(per_vertex.len());
        for (r, n, a) in per_vertex {
            radii.push(r);
            balls.push(n);
            area_ratio.push(a);
        }
        Self {
            mesh: mesh.clone(),
            radii,
            balls,
            area_ratio,
        }
    }

    /// Radius of `B_v` (0 for boundary vertices).
    pub fn radius(&self, v: usize) -> f64 {
        self.radii[v]
    }

    /// Largest relative deviation of the ball quadrature area from `π r_v²`.
    pub fn area_defect(&self) -> f64 {
        (0..self.radii.len())
            .filter(|&v| self.radii[v] > 0.0)
            .map(|v| (self.area_ratio[v] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn apply_with(&self, eval: impl Fn(&BallNode) -> f64 + Sync) -> FeFunction {
        let values: Vec<f64> = self
            .balls
            .par_iter()
            .map(|nodes| nodes.iter().map(|n| n.w * eval(n)).sum())
            .collect();
        FeFunction::from_values(&self.mesh, values)
            .expect("one value per vertex")
            .constrained()
    }

    /// `℘_h w` for pointwise-evaluable `w`.
    pub fn apply_fn(&self, w: impl Fn(Point) -> f64 + Sync) -> FeFunction {
        self.apply_with(|n| w(n.x))
    }

    /// `℘_h w` for a P1 function on the same mesh.
    pub fn apply_fe(&self, w: &FeFunction) -> FeFunction {
        self.apply_with(|n| w.eval_bary(n.cell, &n.bary))
    }
}

/// A smooth or piecewise smooth test field with its gradient and, where
/// available, its Hessian.
#[derive(Clone)]
pub struct TestField {
    pub name: String,
    pub value: ScalarField,
    pub grad: VectorField,
    pub hessian: Option<Arc<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>>,
}

impl TestField {
    /// `sin(πx) sin(πy)` scaled by `s`.
    pub fn sine(s: f64) -> Self {
        use std::f64::consts::PI;
        Self {
            name: format!("sine*{s}"),
            value: Arc::new(move |x: Point| s * (PI * x[0]).sin() * (PI * x[1]).sin()),
            grad: Arc::new(move |x: Point| {
                [
                    s * PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    s * PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            }),
            hessian: Some(Arc::new(move |x: Point| {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                let k = s * PI * PI;
                [[-k * sx * sy, k * cx * cy], [k * cx * cy, -k * sx * sy]]
            })),
        }
    }

    /// `min(x, y, 1−x, 1−y) · (1 + x/2)`, kinked along the square's diagonals.
    pub fn pyramid() -> Self {
        fn dist_grad(x: Point) -> (f64, [f64; 2]) {
            let c = [(x[0], [1.0, 0.0]), (x[1], [0.0, 1.0]), (1.0 - x[0], [-1.0, 0.0]), (1.0 - x[1], [0.0, -1.0])];
            c.iter()
                .copied()
                .fold((f64::INFINITY, [0.0, 0.0]), |acc, c| if c.0 < acc.0 { c } else { acc })
        }
        Self {
            name: "pyramid".into(),
            value: Arc::new(|x: Point| dist_grad(x).0 * (1.0 + 0.5 * x[0])),
            grad: Arc::new(|x: Point| {
                let (d, g) = dist_grad(x);
                let m = 1.0 + 0.5 * x[0];
                [g[0] * m + 0.5 * d, g[1] * m]
            }),
            hessian: None,
        }
    }
}

/// Input to the ratio tables: an analytic field or a P1 function that is
/// prolongated along the refinement sequence.
#[derive(Clone)]
pub enum BankEntry {
    Field(TestField),
    Fe(FeFunction),
}

/// Seeded test functions on the unit square, all with zero trace.
#[derive(Clone)]
pub struct TestBank {
    pub entries: Vec<BankEntry>,
}

/// Random nonnegative-or-signed P1 function with zero trace.
pub fn random_fe(mesh: &Arc<SimplicialMesh>, rng: &mut impl Rng, nonnegative: bool) -> FeFunction {
    let vals = (0..mesh.num_vertices())
        .map(|_| {
            if nonnegative {
                rng.random_range(0.0..1.0)
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    FeFunction::from_values(mesh, vals).unwrap().constrained()
}

impl TestBank {
    /// Smooth, kinked and two random P1 functions (generated on `base`).
    pub fn unit_square(base: &Arc<SimplicialMesh>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            entries: vec![
                BankEntry::Field(TestField::sine(1.0)),
                BankEntry::Field(TestField::pyramid()),
                BankEntry::Fe(random_fe(base, &mut rng, false)),
                BankEntry::Fe(random_fe(base, &mut rng, true)),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKind {
    /// `‖∇Π_h v‖_{L¹(T)} / ‖∇v‖_{L¹(S_T)}`.
    SzL1,
    /// `⨍_T ω Φ(|∇Π_h v|) / ⨍_{S_T} ω Φ(|∇v|)`.
    SzWeightedModular,
    /// As above with `Φ_a`, maximised over `a ∈ {0, 0.1, 1, 10}`.
    SzShifted,
    /// `L^p` stability of values and gradients of `℘_h`, `p ∈ {1, 2, ∞}`.
    PpLp,
    /// `⨍_T ω Φ_a(|∇℘_h w|) / ⨍_{S_T} ω Φ_a(|∇w|)`, maximised over `a`.
    PpWeightedModular,
    /// `‖w − ℘_h w‖_{L²(ω,T)} / (h_T ‖∇w‖_{L²(ω,S_T)})`.
    PpWeightedApprox,
}

impl RatioKind {
    pub const ALL: [RatioKind; 6] = [
        RatioKind::SzL1,
        RatioKind::SzWeightedModular,
        RatioKind::SzShifted,
        RatioKind::PpLp,
        RatioKind::PpWeightedModular,
        RatioKind::PpWeightedApprox,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RatioKind::SzL1 => "sz_l1",
            RatioKind::SzWeightedModular => "sz_weighted_modular",
            RatioKind::SzShifted => "sz_shifted",
            RatioKind::PpLp => "pp_lp",
            RatioKind::PpWeightedModular => "pp_weighted_modular",
            RatioKind::PpWeightedApprox => "pp_weighted_approx",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// Shifts used by the shifted stability tables.
pub const SHIFTS: [f64; 4] = [0.0, 0.1, 1.0, 10.0];

#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub level: usize,
    pub h: f64,
    pub kind: RatioKind,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

/// Value and gradient of a bank entry at a quadrature node.
fn sample(entry: &BankEntry, u: Option<&FeFunction>, c: usize, n: &QuadNode) -> (f64, [f64; 2]) {
    match entry {
        BankEntry::Field(f) => ((f.value)(n.x), (f.grad)(n.x)),
        BankEntry::Fe(_) => {
            let u = u.expect("prolongated function");
            (u.eval_bary(c, &n.bary), u.gradient(c))
        }
    }
}

/// Denominators below this fraction of their largest value are skipped.
const NEGLIGIBLE: f64 = 1e-10;

fn ratios_from_cells(mesh: &SimplicialMesh, num: &[f64], den_cell: &[f64], average: bool) -> Vec<f64> {
    let areas: Vec<f64> = (0..mesh.num_cells()).map(|c| mesh.geometry(c).area).collect();
    let scale = den_cell.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (0..mesh.num_cells())
        .filter_map(|c| {
            let patch = mesh.patch_of_element(c);
            let mut d: f64 = patch.iter().map(|&t| den_cell[t]).sum();
            let mut n = num[c];
            if average {
                d /= patch.iter().map(|&t| areas[t]).sum::<f64>();
                n /= areas[c];
            }
            let dd = if average { d * mesh.total_area() } else { d };
            (dd > NEGLIGIBLE * scale && d > 0.0).then_some(n / d)
        })
        .collect()
}

fn max_ratios_from_cells_inf(mesh: &SimplicialMesh, num: &[f64], den_cell: &[f64]) -> Vec<f64> {
    let scale = den_cell.iter().fold(0.0f64, |m, v| m.max(*v));
    (0..mesh.num_cells())
        .filter_map(|c| {
            let d = mesh
                .patch_of_element(c)
                .iter()
                .map(|&t| den_cell[t])
                .fold(0.0, f64::max);
            (d > NEGLIGIBLE * scale).then_some(num[c] / d)
        })
        .collect()
}

/// Per-element ratios of one kind for one bank entry on one mesh.
pub fn element_ratios(
    kind: RatioKind,
    phi: &NFunction,
    mesh: &Arc<SimplicialMesh>,
    q: &WeightedQuadrature,
    entry: &BankEntry,
    u: Option<&FeFunction>,
) -> Vec<f64> {
    let nc = mesh.num_cells();
    let per_cell = |g: &(dyn Fn(usize, &QuadNode) -> f64 + Sync)| -> Vec<f64> {
        (0..nc)
            .into_par_iter()
            .map(|c| q.nodes(c).iter().map(|n| g(c, n)).sum())
            .collect()
    };
    let interp = match kind {
        RatioKind::SzL1 | RatioKind::SzWeightedModular | RatioKind::SzShifted => {
            let sz = SzOperator::new(mesh);
            match entry {
                BankEntry::Field(f) => sz.apply_fn(|x| (f.value)(x)),
                BankEntry::Fe(_) => sz.apply_fe(u.unwrap()),
            }
        }
        _ => {
            let pp = PpInterpolant::new(mesh);
            match entry {
                BankEntry::Field(f) => pp.apply_fn(|x| (f.value)(x)),
                BankEntry::Fe(_) => pp.apply_fe(u.unwrap()),
            }
        }
    };
    let ig: Vec<f64> = (0..nc)
        .map(|c| {
            let g = interp.gradient(c);
            g[0].hypot(g[1])
        })
        .collect();
    let modular_ratios = |phis: &[NFunction]| -> Vec<f64> {
        let mut best: Option<Vec<(usize, f64)>> = None;
        for f in phis {
            let num: Vec<f64> = (0..nc).map(|c| q.cell_omega(c) * f.phi(ig[c])).collect();
            let den = per_cell(&|c, n| {
                let (_, g) = sample(entry, u, c, n);
                n.ww * f.phi(g[0].hypot(g[1]))
            });
            let r = ratios_from_cells_indexed(mesh, &num, &den, true);
            best = Some(match best {
                None => r,
                Some(b) => merge_max(b, r),
            });
        }
        best.unwrap_or_default().into_iter().map(|x| x.1).collect()
    };
    let shifted = || -> Vec<NFunction> { SHIFTS.iter().map(|&a| phi.shift(a).unwrap()).collect() };
    match kind {
        RatioKind::SzL1 => {
            let num: Vec<f64> = (0..nc).map(|c| ig[c] * mesh.geometry(c).area).collect();
            let den = per_cell(&|c, n| {
                let (_, g) = sample(entry, u, c, n);
                n.w * g[0].hypot(g[1])
            });
            ratios_from_cells(mesh, &num, &den, false)
        }
        RatioKind::SzWeightedModular => modular_ratios(std::slice::from_ref(phi)),
        RatioKind::SzShifted | RatioKind::PpWeightedModular => modular_ratios(&shifted()),
        RatioKind::PpLp => {
            let mut all: Option<Vec<(usize, f64)>> = None;
            for p in [1.0, 2.0] {
                let num_v = per_cell(&|c, n| n.w * interp.eval_bary(c, &n.bary).abs().powf(p));
                let den_v = per_cell(&|c, n| n.w * sample(entry, u, c, n).0.abs().powf(p));
                let num_g: Vec<f64> = (0..nc).map(|c| mesh.geometry(c).area * ig[c].powf(p)).collect();
                let den_g = per_cell(&|c, n| {
                    let g = sample(entry, u, c, n).1;
                    n.w * g[0].hypot(g[1]).powf(p)
                });
                for (nu, de) in [(num_v, den_v), (num_g, den_g)] {
                    let r: Vec<(usize, f64)> = ratios_from_cells_indexed(mesh, &nu, &de, false)
                        .into_iter()
                        .map(|(c, x)| (c, x.powf(1.0 / p)))
                        .collect();
                    all = Some(match all {
                        None => r,
                        Some(b) => merge_max(b, r),
                    });
                }
            }
            let mut out: Vec<f64> = all.unwrap_or_default().into_iter().map(|x| x.1).collect();
            // p = ∞ on values and gradients
            let sup_cell = |f: &dyn Fn(usize, &QuadNode) -> f64| -> Vec<f64> {
                (0..nc)
                    .map(|c| q.nodes(c).iter().map(|n| f(c, n)).fold(0.0, f64::max))
                    .collect()
            };
            let num_v: Vec<f64> = (0..nc)
                .map(|c| mesh.cells()[c].iter().map(|&v| interp.values()[v].abs()).fold(0.0, f64::max))
                .collect();
            let den_v = sup_cell(&|c, n| sample(entry, u, c, n).0.abs());
            let den_g = sup_cell(&|c, n| {
                let g = sample(entry, u, c, n).1;
                g[0].hypot(g[1])
            });
            let rv = max_ratios_from_cells_inf(mesh, &num_v, &den_v);
            let rg = max_ratios_from_cells_inf(mesh, &ig, &den_g);
            out.extend(rv);
            out.extend(rg);
            out
        }
        RatioKind::PpWeightedApprox => {
            let hs = mesh.shape_metrics().h_t;
            let num = per_cell(&|c, n| {
                let d = sample(entry, u, c, n).0 - interp.eval_bary(c, &n.bary);
                n.ww * d * d
            });
            let den = per_cell(&|c, n| {
                let g = sample(entry, u, c, n).1;
                n.ww * (g[0] * g[0] + g[1] * g[1])
            });
            ratios_from_cells_indexed(mesh, &num, &den, false)
                .into_iter()
                .map(|(c, r)| r.sqrt() / hs[c])
                .collect()
        }
    }
}

fn ratios_from_cells_indexed(
    mesh: &SimplicialMesh,
    num: &[f64],
    den_cell: &[f64],
    average: bool,
) -> Vec<(usize, f64)> {
    let areas: Vec<f64> = (0..mesh.num_cells()).map(|c| mesh.geometry(c).area).collect();
    let total: f64 = den_cell.iter().sum();
    (0..mesh.num_cells())
        .filter_map(|c| {
            let patch = mesh.patch_of_element(c);
            let d_int: f64 = patch.iter().map(|&t| den_cell[t]).sum();
            if !(d_int > NEGLIGIBLE * total) {
                return None;
            }
            let r = if average {
                let pa: f64 = patch.iter().map(|&t| areas[t]).sum();
                (num[c] / areas[c]) / (d_int / pa)
            } else {
                num[c] / d_int
            };
            Some((c, r))
        })
        .collect()
}

fn merge_max(a: Vec<(usize, f64)>, b: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut map: std::collections::BTreeMap<usize, f64> = a.into_iter().collect();
    for (c, r) in b {
        let e = map.entry(c).or_insert(r);
        *e = e.max(r);
    }
    map.into_iter().collect()
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ratio table for one kind on the meshes obtained by refining `base`
/// `1..=levels` times; ratios are pooled over the bank.
///
/// The random P1 entries of the bank live on `base`, so the first table
/// level is already one refinement finer than the mesh they were drawn on.
pub fn stability_ratio_report(
    kind: RatioKind,
    phi: &NFunction,
    weight: &Weight,
    bank: &TestBank,
    base: &Arc<SimplicialMesh>,
    levels: usize,
    quad_degree: usize,
) -> Vec<RatioRow> {
    let mut rows = Vec::with_capacity(levels);
    let mut mesh = base.clone();
    let mut fes: Vec<Option<FeFunction>> = bank
        .entries
        .iter()
        .map(|e| match e {
            BankEntry::Fe(f) => Some(f.clone()),
            BankEntry::Field(_) => None,
        })
        .collect();
    for level in 1..=levels {
        let r = mesh.refine_uniform();
        let fine = Arc::new(r.mesh);
        for f in fes.iter_mut().flatten() {
            *f = f.prolongate(&fine, &r.midpoint_parents);
        }
        mesh = fine;
        let q = WeightedQuadrature::new(&mesh, weight, quad_degree);
        let mut pooled = Vec::new();
        for (e, u) in bank.entries.iter().zip(&fes) {
            pooled.extend(element_ratios(kind, phi, &mesh, &q, e, u.as_ref()));
        }
        let max_ratio = pooled.iter().cloned().fold(0.0, f64::max);
        rows.push(RatioRow {
            level,
            h: mesh.h(),
            kind,
            max_ratio,
            median_ratio: median(&mut pooled),
        });
    }
    rows
}

/// `max/min` of the per-level maximal ratios.
pub fn level_spread(rows: &[RatioRow]) -> f64 {
    let hi = rows.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.max_ratio).fold(f64::INFINITY, f64::min);
    hi / lo
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiBestRow {
    pub level: usize,
    pub h: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
}

/// `⨍_T ω|V(∇v) − V(∇Π_h v)|² / (h_T² ⨍_{S_T} ω|∇V(∇v)|²)` per level.
pub fn quasi_best_report(
    phi: &NFunction,
    weight: &Weight,
    field: &TestField,
    base: &Arc<SimplicialMesh>,
    levels: usize,
    quad_degree: usize,
) -> Vec<QuasiBestRow> {
    let hess = field.hessian.clone().expect("quasi-best report needs a Hessian");
    let mut out = Vec::new();
    let mut mesh = base.clone();
    for level in 0..levels {
        let q = WeightedQuadrature::new(&mesh, weight, quad_degree);
        let sz = SzOperator::new(&mesh);
        let piv = sz.apply_fn(|x| (field.value)(x));
        let nc = mesh.num_cells();
        let hs = mesh.shape_metrics().h_t;
        let num: Vec<f64> = (0..nc)
            .into_par_iter()
            .map(|c| {
                let vi = phi.vector_v(&piv.gradient(c));
                q.nodes(c)
                    .iter()
                    .map(|n| {
                        let v = phi.vector_v(&(field.grad)(n.x));
                        n.ww * ((v[0] - vi[0]).powi(2) + (v[1] - vi[1]).powi(2))
                    })
                    .sum()
            })
            .collect();
        let den: Vec<f64> = (0..nc)
            .into_par_iter()
            .map(|c| {
                q.nodes(c)
                    .iter()
                    .map(|n| n.ww * grad_v_sq(phi, (field.grad)(n.x), hess(n.x)))
                    .sum()
            })
            .collect();
        let mut ratios: Vec<f64> = ratios_from_cells_indexed(&mesh, &num, &den, true)
            .into_iter()
            .map(|(c, r)| r / (hs[c] * hs[c]))
            .collect();
        out.push(QuasiBestRow {
            level,
            h: mesh.h(),
            max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
            median_ratio: median(&mut ratios),
        });
        mesh = Arc::new(mesh.refine_uniform().mesh);
    }
    out
}

/// `|∇V(∇v)|² = |DV(∇v) D²v|²` (Frobenius).
pub fn grad_v_sq(phi: &NFunction, grad: [f64; 2], hess: [[f64; 2]; 2]) -> f64 {
    let dv = phi.linearized_v(&grad);
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let m = dv[i][0] * hess[0][j] + dv[i][1] * hess[1][j];
            s += m * m;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Pattern;

    fn unit(n: usize) -> Arc<SimplicialMesh> {
        Arc::new(SimplicialMesh::structured_rect(n, n, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross).unwrap())
    }

    #[test]
    fn scott_zhang_reproduces_p1() {
        let m = unit(4);
        let sz = SzOperator::new(&m);
        assert!(sz.dual_basis_defect() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_fe(&m, &mut rng, false);
        let pu = sz.apply_fe(&u);
        for (a, b) in pu.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = sz.apply_fn(|_| 1.0);
        assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn scott_zhang_keeps_zero_trace() {
        let m = unit(4);
        let sz = SzOperator::new(&m);
        let s = TestField::sine(1.0);
        let pv = sz.apply_fn(|x| (s.value)(x));
        for v in 0..m.num_vertices() {
            if m.is_boundary_vertex(v) {
                assert!(pv.values()[v].abs() < 1e-15);
            }
        }
        assert!(matches!(sz.averaging_set(0), AveragingSet::Face(_)));
    }

    #[test]
    fn pp_ball_quadrature_and_symmetry() {
        let m = unit(4);
        let pp = PpInterpolant::new(&m);
        assert!(pp.area_defect() < 1e-12);
        let lin = |x: Point| 0.3 + 2.0 * x[0] - 1.5 * x[1];
        let w = pp.apply_fn(lin);
        for v in m.interior_vertices() {
            assert!((w.values()[v] - lin(m.vertices()[v])).abs() < 1e-12);
        }
        let c = pp.apply_fn(|_| 2.0);
        for v in 0..m.num_vertices() {
            let expect = if m.is_boundary_vertex(v) { 0.0 } else { 2.0 };
            assert!((c.values()[v] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn pp_is_positive_and_linear() {
        let m = unit(3);
        let pp = PpInterpolant::new(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_fe(&m, &mut rng, true);
        let b = random_fe(&m, &mut rng, false);
        let pa = pp.apply_fe(&a);
        assert!(pa.values().iter().all(|&v| v >= 0.0));
        let lhs = pp.apply_fe(&a.axpy(-2.0, &b));
        let rhs = pa.axpy(-2.0, &pp.apply_fe(&b));
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sz_l1_ratio_is_at_most_one_on_p1() {
        let m = unit(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bank = TestBank {
            entries: vec![BankEntry::Fe(random_fe(&m, &mut rng, false))],
        };
        let phi = NFunction::power(2.0).unwrap();
        let rows = stability_ratio_report(RatioKind::SzL1, &phi, &Weight::one(), &bank, &m, 2, 6);
        assert!(rows.iter().all(|r| r.max_ratio <= 1.0 + 1e-9));
    }

    #[test]
    fn pyramid_gradient_matches_difference_quotient() {
        let f = TestField::pyramid();
        for x in [[0.2, 0.3], [0.7, 0.4], [0.45, 0.9]] {
            let g = (f.grad)(x);
            let h = 1e-7;
            let dx = ((f.value)([x[0] + h, x[1]]) - (f.value)([x[0] - h, x[1]])) / (2.0 * h);
            let dy = ((f.value)([x[0], x[1] + h]) - (f.value)([x[0], x[1] - h])) / (2.0 * h);
            assert!((g[0] - dx).abs() < 1e-6 && (g[1] - dy).abs() < 1e-6);
        }
    }
}
