//! Manufactured solutions, quasi-norm errors and convergence studies.
//!
//! A study case is plain data ([`CaseSpec`]) so that it can be read from a
//! JSON file; [`run_convergence`] turns it into a [`ConvergenceReport`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::femcore::{FeFunction, RhsFunctional, WeightedQuadrature};
use crate::interp::{grad_v_sq, SzOperator};
use crate::mesh::{Pattern, SimplicialMesh};
use crate::nfunc::{NFunction, NFunctionSpec};
use crate::solve::{solve_equation, solve_obstacle, ExactSolution, ProblemSpec, SolverConfig};
use crate::weight::{is_a_phi, is_ap_omega, BallSampler, WeightSpec};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Nodal feasibility and complementarity bound required at every obstacle level.
pub const OBSTACLE_RESIDUAL_BOUND: f64 = 1e-8;

/// Smooth exact solutions with zero trace on the unit square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionSpec {
    /// `sin(πx) sin(πy)`.
    Sine,
    /// `(1 − |x − c|²/R²)²` inside the disk, zero outside.
    Bump { center: [f64; 2], radius: f64 },
}

type Hessian = Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;

impl SolutionSpec {
    pub fn exact(&self) -> (ExactSolution, Hessian) {
        match *self {
            SolutionSpec::Sine => (
                ExactSolution {
                    value: Arc::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin()),
                    grad: Arc::new(|x| {
                        [
                            PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                        ]
                    }),
                },
                Arc::new(|x| {
                    let (sx, cx) = (PI * x[0]).sin_cos();
                    let (sy, cy) = (PI * x[1]).sin_cos();
                    let k = PI * PI;
                    [[-k * sx * sy, k * cx * cy], [k * cx * cy, -k * sx * sy]]
                }),
            ),
            SolutionSpec::Bump { center: c, radius: r } => {
                let r2 = r * r;
                let s = move |x: [f64; 2]| (1.0 - ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / r2).max(0.0);
                (
                    ExactSolution {
                        value: Arc::new(move |x| s(x).powi(2)),
                        grad: Arc::new(move |x| {
                            let k = -4.0 * s(x) / r2;
                            [k * (x[0] - c[0]), k * (x[1] - c[1])]
                        }),
                    },
                    Arc::new(move |x| {
                        let sx = s(x);
                        if sx == 0.0 {
                            return [[0.0; 2]; 2];
                        }
                        let d = [x[0] - c[0], x[1] - c[1]];
                        let k = -4.0 / r2;
                        std::array::from_fn(|i| {
                            std::array::from_fn(|j| {
                                let delta = if i == j { 1.0 } else { 0.0 };
                                k * (sx * delta - 2.0 * d[i] * d[j] / r2)
                            })
                        })
                    }),
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    /// `b(v) = ∫ ω A(∇u_ex) · ∇v`.
    ExactGradient,
    /// `∫ 2π² sin(πx) sin(πy) v`; only valid for `Φ_2`, `ω ≡ 1` and the sine solution.
    PoissonSine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleSpec {
    /// `ψ = u_ex − η` with `η = s_η (|x−c|² − r²)₊³` and contact density
    /// `g = s_g (r² − |x−c|²)₊³`.
    Manufactured {
        center: [f64; 2],
        contact_radius: f64,
        eta_scale: f64,
        g_scale: f64,
    },
    /// `ψ = u_ex − offset`, never in contact.
    NoContact { offset: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EocCheck {
    /// Last-pair EOC within `expected ± tolerance`.
    Band { expected: f64, tolerance: f64 },
    /// Last-pair EOC at least `floor`.
    Floor { floor: f64 },
}

impl EocCheck {
    pub fn accepts(&self, eoc: f64) -> bool {
        match *self {
            EocCheck::Band { expected, tolerance } => (eoc - expected).abs() <= tolerance,
            EocCheck::Floor { floor } => eoc >= floor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub phi: NFunctionSpec,
    pub weight: WeightSpec,
    pub solution: SolutionSpec,
    pub rhs: RhsKind,
    #[serde(default)]
    pub obstacle: Option<ObstacleSpec>,
    pub pattern: Pattern,
    pub base_resolution: usize,
    pub levels: usize,
    pub quad_degree: usize,
    pub eoc_check: EocCheck,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn base_case(name: &str, phi: NFunctionSpec, weight: WeightSpec, solution: SolutionSpec) -> CaseSpec {
    CaseSpec {
        name: name.into(),
        phi,
        weight,
        solution,
        rhs: RhsKind::ExactGradient,
        obstacle: None,
        pattern: Pattern::CrissCross,
        base_resolution: 8,
        levels: 5,
        quad_degree: 6,
        eoc_check: EocCheck::Band {
            expected: 1.0,
            tolerance: 0.15,
        },
        seed: 2024,
        solver: SolverConfig::default(),
    }
}

fn phi_spec(p: f64, kappa: f64) -> NFunctionSpec {
    if kappa == 0.0 {
        NFunctionSpec::Power { p }
    } else {
        NFunctionSpec::ShiftedPower { p, kappa }
    }
}

/// Equation case with an exact-gradient right-hand side; predicted EOC 1.
pub fn manufactured_equation_case(name: &str, p: f64, kappa: f64, weight: WeightSpec, solution: SolutionSpec) -> CaseSpec {
    base_case(name, phi_spec(p, kappa), weight, solution)
}

/// Obstacle case around the sine solution with a contact disk of radius ¼
/// at the centre of the square; the proven EOC floor is ½.
pub fn manufactured_obstacle_case(name: &str, p: f64, weight: WeightSpec) -> CaseSpec {
    let mut c = base_case(name, phi_spec(p, 0.0), weight, SolutionSpec::Sine);
    c.obstacle = Some(ObstacleSpec::Manufactured {
        center: [0.5, 0.5],
        contact_radius: 0.25,
        eta_scale: 10.0,
        g_scale: 4e4,
    });
    c.eoc_check = EocCheck::Floor { floor: 0.45 };
    c
}

/// The cases shipped with the crate.
pub fn builtin_cases() -> Vec<CaseSpec> {
    let one = WeightSpec::Constant { value: 1.0 };
    let centre = [0.5, 0.5];
    let mut analytic = manufactured_equation_case("p2_analytic", 2.0, 0.0, one.clone(), SolutionSpec::Sine);
    analytic.rhs = RhsKind::PoissonSine;
    let mut no_contact = manufactured_obstacle_case("obstacle_no_contact", 2.0, one.clone());
    no_contact.obstacle = Some(ObstacleSpec::NoContact { offset: 0.1 });
    no_contact.eoc_check = EocCheck::Band {
        expected: 1.0,
        tolerance: 0.15,
    };
    vec![
        manufactured_equation_case("p2_sine", 2.0, 0.0, one.clone(), SolutionSpec::Sine),
        manufactured_equation_case("p1.5_sine", 1.5, 0.0, one.clone(), SolutionSpec::Sine),
        manufactured_equation_case(
            "p3_bump_weighted",
            3.0,
            0.1,
            WeightSpec::RadialPower { center: centre, alpha: 0.5 },
            SolutionSpec::Bump {
                center: [0.45, 0.5],
                radius: 0.4,
            },
        ),
        analytic,
        manufactured_obstacle_case("obstacle_p2", 2.0, one),
        manufactured_obstacle_case(
            "obstacle_p2.5_weighted",
            2.5,
            WeightSpec::RadialPower {
                center: centre,
                alpha: 1.0 / 3.0,
            },
        ),
        no_contact,
    ]
}

/// The three equation cases of the rate experiment.
pub const EQUATION_CASES: [&str; 3] = ["p2_sine", "p1.5_sine", "p3_bump_weighted"];
/// The obstacle cases with contact.
pub const OBSTACLE_CASES: [&str; 2] = ["obstacle_p2", "obstacle_p2.5_weighted"];

pub fn builtin_case(name: &str) -> Option<CaseSpec> {
    builtin_cases().into_iter().find(|c| c.name == name)
}

/// The assembled problem for a case plus data the report needs.
pub struct CaseProblem {
    pub spec: ProblemSpec,
    pub hessian: Hessian,
    /// `∇(u_ex − ψ)` for obstacle cases.
    pub grad_gap: Option<crate::femcore::VectorField>,
    /// Contact density `g` for obstacle cases.
    pub density: Option<crate::femcore::ScalarField>,
}

impl CaseSpec {
    pub fn problem(&self) -> Result<CaseProblem> {
        let phi = self.phi.build()?;
        let weight = self.weight.build();
        let (exact, hessian) = self.solution.exact();
        let mut rhs = match self.rhs {
            RhsKind::ExactGradient => {
                let g = exact.grad.clone();
                RhsFunctional::exact_gradient(move |x| g(x))
            }
            RhsKind::PoissonSine => {
                let ok = phi.power_exponent() == Some(2.0) && weight.is_constant() && weight.eval([0.5, 0.5]) == 1.0;
                if !ok || self.solution != SolutionSpec::Sine {
                    return Err(Error::Domain(
                        "the Poisson sine right-hand side needs p = 2, unit weight and the sine solution".into(),
                    ));
                }
                RhsFunctional::analytic(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin())
            }
        };
        let mut obstacle = None;
        let mut grad_gap = None;
        let mut density = None;
        match self.obstacle {
            None => {}
            Some(ObstacleSpec::Manufactured {
                center: c,
                contact_radius: rd,
                eta_scale,
                g_scale,
            }) => {
                if rd <= 0.0 || eta_scale <= 0.0 || g_scale < 0.0 {
                    return Err(Error::Domain("invalid obstacle construction parameters".into()));
                }
                let d2 = move |x: [f64; 2]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                let r2 = rd * rd;
                let u = exact.value.clone();
                obstacle = Some(Arc::new(move |x: [f64; 2]| u(x) - eta_scale * (d2(x) - r2).max(0.0).powi(3))
                    as crate::femcore::ScalarField);
                grad_gap = Some(Arc::new(move |x: [f64; 2]| {
                    let k = 6.0 * eta_scale * (d2(x) - r2).max(0.0).powi(2);
                    [k * (x[0] - c[0]), k * (x[1] - c[1])]
                }) as crate::femcore::VectorField);
                let g = Arc::new(move |x: [f64; 2]| g_scale * (r2 - d2(x)).max(0.0).powi(3));
                let gg = g.clone();
                rhs = rhs.with_source(move |x| -gg(x));
                density = Some(g as crate::femcore::ScalarField);
            }
            Some(ObstacleSpec::NoContact { offset }) => {
                if offset <= 0.0 {
                    return Err(Error::Domain("no-contact offset must be positive".into()));
                }
                let u = exact.value.clone();
                obstacle = Some(Arc::new(move |x: [f64; 2]| u(x) - offset) as crate::femcore::ScalarField);
                grad_gap = Some(Arc::new(|_| [0.0, 0.0]) as crate::femcore::VectorField);
                density = Some(Arc::new(|_| 0.0) as crate::femcore::ScalarField);
            }
        }
        Ok(CaseProblem {
            spec: ProblemSpec {
                phi,
                weight,
                rhs,
                obstacle,
                exact: Some(exact),
            },
            hessian,
            grad_gap,
            density,
        })
    }

    pub fn base_mesh(&self) -> Result<SimplicialMesh> {
        SimplicialMesh::structured_rect(
            self.base_resolution,
            self.base_resolution,
            [0.0, 1.0, 0.0, 1.0],
            self.pattern,
        )
    }
}

/// `(Σ_T ∫_T ω |V(∇u_ex) − V(∇u_h)|²)^{1/2}`.
pub fn quasinorm_error(
    phi: &NFunction,
    q: &WeightedQuadrature,
    grad_exact: &(dyn Fn([f64; 2]) -> [f64; 2] + Sync),
    u: &FeFunction,
) -> f64 {
    q.integrate(|c, n| {
        let a = phi.vector_v(&grad_exact(n.x));
        let b = phi.vector_v(&u.gradient(c));
        (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
    })
    .sqrt()
}

/// `(∫ ω (u_ex − u_h)²)^{1/2}`.
pub fn weighted_l2_error(q: &WeightedQuadrature, exact: &(dyn Fn([f64; 2]) -> f64 + Sync), u: &FeFunction) -> f64 {
    q.integrate(|c, n| (exact(n.x) - u.eval_bary(c, &n.bary)).powi(2)).sqrt()
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    pub aphi_member: bool,
    pub aphi_direct: Option<f64>,
    pub aphi_indirect: Option<f64>,
    pub aphi_inconsistent: bool,
    pub lower_index: Option<f64>,
    /// Collar diagnostics, obstacle cases only.
    pub ap_omega_member: Option<bool>,
    pub omega_l: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityCheck {
    /// `∫ ω |∇V(∇u_ex)|²` on the two finest meshes.
    pub values: Vec<f64>,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub sigma: f64,
    pub quasinorm_error: f64,
    pub weighted_l2_error: f64,
    /// `𝒥_h(I_h u_ex) − 𝒥_h(u_h)` with the nodal interpolant.
    pub energy_gap: f64,
    pub solver_iters: usize,
    pub residual: f64,
    /// Quasi-norm error of `u_h` over that of `Π_h u_ex`.
    pub best_approx_ratio: f64,
    pub active_set_size: Option<usize>,
    pub feasibility: Option<f64>,
    pub complementarity: Option<f64>,
    pub multiplier_negativity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub case: CaseSpec,
    pub weight: WeightDiagnostics,
    pub regularity: Option<RegularityCheck>,
    /// Set when the regularity precheck is not level-stable.
    pub rate_not_guaranteed: bool,
    pub levels: Vec<LevelRecord>,
    pub eoc: Vec<f64>,
    /// `‖∇(u − ψ)‖_{L²(ω)}`, obstacle cases only.
    pub grad_u_minus_psi: Option<f64>,
    /// `∫ g² / ω`, obstacle cases only.
    pub multiplier_l2_weighted: Option<f64>,
    /// Whether the last-pair EOC is within 0.15 of one (recorded for obstacle cases).
    pub observed_rate_one: Option<bool>,
    pub failure: Option<String>,
    pub passed: bool,
}

impl ConvergenceReport {
    pub fn last_eoc(&self) -> Option<f64> {
        self.eoc.last().copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported report schema version {}", r.schema_version)));
        }
        Ok(r)
    }

    /// `level,h,dofs,quasinorm_error,eoc,solver_iters`; the EOC of a level
    /// is the one of the pair ending at it.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,h,dofs,quasinorm_error,eoc,solver_iters\n");
        for (i, l) in self.levels.iter().enumerate() {
            let eoc = if i == 0 {
                String::new()
            } else {
                self.eoc.get(i - 1).map(|e| format!("{e:?}")).unwrap_or_default()
            };
            let _ = writeln!(
                out,
                "{},{:?},{},{:?},{},{}",
                l.level, l.h, l.dofs, l.quasinorm_error, eoc, l.solver_iters
            );
        }
        out
    }
}

/// `log(e_l/e_{l+1}) / log(h_l/h_{l+1})` for adjacent levels.
pub fn eocs(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2)
        .zip(e.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

fn weight_diagnostics(case: &CaseSpec, cp: &CaseProblem, mesh: &SimplicialMesh) -> WeightDiagnostics {
    let sampler = BallSampler::new(mesh.bounding_box(), case.seed);
    let v = is_a_phi(&cp.spec.weight, &cp.spec.phi, &sampler);
    let (ap_omega_member, omega_l) = if case.obstacle.is_some() {
        let r = is_ap_omega(&cp.spec.weight, mesh, 2.0, 0.1, case.seed);
        (Some(r.member), finite(r.omega_l))
    } else {
        (None, None)
    };
    WeightDiagnostics {
        aphi_member: v.member,
        aphi_direct: finite(v.direct),
        aphi_indirect: finite(v.indirect.characteristic),
        aphi_inconsistent: v.inconsistent,
        lower_index: finite(v.lower_index),
        ap_omega_member,
        omega_l,
    }
}

/// Solves every level of the case (coarse-to-fine warm starts) and collects
/// errors, EOCs and diagnostics. Solver failure ends the study early with a
/// failure marker instead of an error.
pub fn run_convergence(case: &CaseSpec) -> Result<ConvergenceReport> {
    if case.levels < 2 {
        return Err(Error::Domain("a convergence study needs at least two levels".into()));
    }
    let cp = case.problem()?;
    let exact = cp.spec.exact.clone().expect("cases carry exact solutions");
    let phi = cp.spec.phi.clone();
    let base = case.base_mesh()?;
    let weight_diag = weight_diagnostics(case, &cp, &base);

    let mut mesh = Arc::new(base);
    let mut parents: Option<Vec<[usize; 2]>> = None;
    let mut prev: Option<FeFunction> = None;
    let mut levels = Vec::new();
    let mut regularity_values = Vec::new();
    let mut failure = None;
    let mut finest_q: Option<WeightedQuadrature> = None;
    for level in 0..case.levels {
        if level > 0 {
            let r = mesh.refine_uniform();
            mesh = Arc::new(r.mesh);
            parents = Some(r.midpoint_parents);
        }
        let disc = cp.spec.discretize(&mesh, case.quad_degree);
        let initial = match (&prev, &parents) {
            (Some(u), Some(p)) => Some(u.prolongate(&mesh, p)),
            _ => None,
        };
        if let Some(psi) = &cp.spec.obstacle {
            // u_ex ≥ ψ must hold at every quadrature node
            let bad = (0..mesh.num_cells())
                .any(|c| disc.quad.nodes(c).iter().any(|n| (exact.value)(n.x) < psi(n.x)));
            if bad {
                return Err(Error::Domain("obstacle construction violates u_ex ≥ ψ".into()));
            }
        }
        let (u, iters, residual, obstacle_info) = if cp.spec.obstacle.is_some() {
            let s = solve_obstacle(&cp.spec, &disc, &case.solver, initial)?;
            if !s.converged {
                failure = Some(format!("active-set solver did not converge at level {level}"));
            }
            let info = (
                s.active.len(),
                s.feasibility_violation(),
                s.complementarity(),
                s.multiplier_negativity(),
            );
            (s.u.clone(), s.log.len(), s.residual, Some(info))
        } else {
            let s = solve_equation(&disc, &case.solver, initial)?;
            if !s.converged {
                failure = Some(format!("Newton did not converge at level {level}"));
            }
            (s.u.clone(), s.iterations, s.residual, None)
        };
        let q = &disc.quad;
        let e = quasinorm_error(&phi, q, &*exact.grad, &u);
        let sz = SzOperator::new(&mesh).apply_fn(|x| (exact.value)(x));
        let e_sz = quasinorm_error(&phi, q, &*exact.grad, &sz);
        let interp = FeFunction::interpolate(&mesh, |x| (exact.value)(x)).constrained();
        let metrics = mesh.shape_metrics();
        levels.push(LevelRecord {
            level,
            h: metrics.h,
            dofs: disc.dofs.len(),
            sigma: metrics.sigma,
            quasinorm_error: e,
            weighted_l2_error: weighted_l2_error(q, &*exact.value, &u),
            energy_gap: disc.energy(&interp) - disc.energy(&u),
            solver_iters: iters,
            residual,
            best_approx_ratio: e / e_sz,
            active_set_size: obstacle_info.map(|i| i.0),
            feasibility: obstacle_info.map(|i| i.1),
            complementarity: obstacle_info.map(|i| i.2),
            multiplier_negativity: obstacle_info.map(|i| i.3),
        });
        if level + 2 >= case.levels {
            let h = &cp.hessian;
            regularity_values.push(q.integrate(|_, n| grad_v_sq(&phi, (exact.grad)(n.x), h(n.x))));
        }
        prev = Some(u);
        if level + 1 == case.levels {
            finest_q = Some(disc.quad);
        }
        if failure.is_some() {
            break;
        }
    }

    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let e: Vec<f64> = levels.iter().map(|l| l.quasinorm_error).collect();
    let eoc = eocs(&h, &e);
    let regularity = (regularity_values.len() == 2).then(|| {
        let [a, b] = [regularity_values[0], regularity_values[1]];
        RegularityCheck {
            stable: a.is_finite() && b.is_finite() && (a - b).abs() <= 0.05 * b.abs(),
            values: regularity_values.clone(),
        }
    });
    let rate_not_guaranteed = regularity.as_ref().is_some_and(|r| !r.stable);
    let (grad_u_minus_psi, multiplier_l2_weighted) = match (&cp.grad_gap, &cp.density, &finest_q) {
        (Some(gg), Some(g), Some(q)) => {
            let a = q.integrate(|_, n| {
                let v = gg(n.x);
                v[0] * v[0] + v[1] * v[1]
            });
            let b = q.integrate_unweighted(|_, n| {
                let w = cp.spec.weight.eval(n.x);
                g(n.x).powi(2) / w
            });
            (Some(a.sqrt()), Some(b))
        }
        _ => (None, None),
    };
    let last = eoc.last().copied();
    let observed_rate_one = case.obstacle.as_ref().and(last.map(|e| (e - 1.0).abs() <= 0.15));
    let residuals_ok = levels.iter().all(|l| {
        l.feasibility.is_none_or(|f| f <= OBSTACLE_RESIDUAL_BOUND)
            && l.complementarity.is_none_or(|c| c <= OBSTACLE_RESIDUAL_BOUND)
    });
    let passed = failure.is_none()
        && levels.len() == case.levels
        && last.is_some_and(|e| case.eoc_check.accepts(e))
        && residuals_ok;
    Ok(ConvergenceReport {
        schema_version: SCHEMA_VERSION,
        case: case.clone(),
        weight: weight_diag,
        regularity,
        rate_not_guaranteed,
        levels,
        eoc,
        grad_u_minus_psi,
        multiplier_l2_weighted,
        observed_rate_one,
        failure,
        passed,
    })
}

/// Where a problem file takes its mesh from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSource {
    /// Structured mesh of the unit square, refined `refinements` times.
    Structured {
        resolution: usize,
        pattern: Pattern,
        #[serde(default)]
        refinements: usize,
    },
    /// A mesh in the crate's text format.
    File { path: String },
}

fn default_quad_degree() -> usize {
    6
}

/// Input of the `solve` command: one problem on one mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub phi: NFunctionSpec,
    pub weight: WeightSpec,
    pub solution: SolutionSpec,
    pub rhs: RhsKind,
    #[serde(default)]
    pub obstacle: Option<ObstacleSpec>,
    pub mesh: MeshSource,
    #[serde(default = "default_quad_degree")]
    pub quad_degree: usize,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// Result of [`solve_problem_file`].
pub struct SolvedProblem {
    pub u: FeFunction,
    pub report: crate::solve::SolveReport,
}

/// Solves a problem file; paths in [`MeshSource::File`] are taken relative
/// to `dir`.
pub fn solve_problem_file(file: &ProblemFile, dir: &std::path::Path) -> Result<SolvedProblem> {
    let mesh = match &file.mesh {
        MeshSource::Structured {
            resolution,
            pattern,
            refinements,
        } => SimplicialMesh::structured_rect(*resolution, *resolution, [0.0, 1.0, 0.0, 1.0], *pattern)?
            .refined(*refinements),
        MeshSource::File { path } => SimplicialMesh::from_text(&std::fs::read_to_string(dir.join(path))?)?,
    };
    let mesh = Arc::new(mesh);
    let case = CaseSpec {
        name: "problem".into(),
        phi: file.phi.clone(),
        weight: file.weight.clone(),
        solution: file.solution.clone(),
        rhs: file.rhs,
        obstacle: file.obstacle.clone(),
        pattern: Pattern::CrissCross,
        base_resolution: 1,
        levels: 1,
        quad_degree: file.quad_degree,
        eoc_check: EocCheck::Floor { floor: 0.0 },
        seed: 0,
        solver: file.solver,
    };
    let cp = case.problem()?;
    let disc = cp.spec.discretize(&mesh, file.quad_degree);
    if cp.spec.obstacle.is_some() {
        let s = solve_obstacle(&cp.spec, &disc, &file.solver, None)?;
        Ok(SolvedProblem {
            report: crate::solve::SolveReport::from_obstacle(&s),
            u: s.u,
        })
    } else {
        let s = solve_equation(&disc, &file.solver, None)?;
        Ok(SolvedProblem {
            report: crate::solve::SolveReport::from_equation(&s),
            u: s.u,
        })
    }
}
