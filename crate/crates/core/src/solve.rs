//! Damped Newton for the discrete weighted Φ-Laplace equation, a primal-dual
//! active-set method with projected Gauss–Seidel fallback for the discrete
//! obstacle problem, and the nodal Lagrange multiplier.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::femcore::{gradient_modular, CsrMatrix, Discretization, FeFunction, ScalarField, VectorField};
use crate::interp::PpInterpolant;
use crate::mesh::SimplicialMesh;
use crate::nfunc::{NFunction, DEFAULT_EPS_REG};
use crate::weight::Weight;
use crate::{Error, Result};

/// Exact solution of a manufactured problem.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: ScalarField,
    pub grad: VectorField,
}

/// A continuous problem: `min ∫ ω Φ(|∇v|) − b(v)` over the zero-trace space,
/// optionally subject to `v ≥ ψ`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub phi: NFunction,
    pub weight: Weight,
    pub rhs: crate::femcore::RhsFunctional,
    pub obstacle: Option<ScalarField>,
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    pub fn discretize(&self, mesh: &Arc<SimplicialMesh>, quad_degree: usize) -> Discretization {
        Discretization::new(mesh.clone(), self.phi.clone(), self.weight.clone(), &self.rhs, quad_degree)
    }

    /// Checks `ψ ≤ 0` at the boundary vertices of `mesh`.
    pub fn check_obstacle_trace(&self, mesh: &SimplicialMesh) -> Result<()> {
        let Some(psi) = &self.obstacle else {
            return Ok(());
        };
        for v in 0..mesh.num_vertices() {
            if mesh.is_boundary_vertex(v) {
                let x = mesh.vertices()[v];
                let val = psi(x);
                if val > 0.0 {
                    return Err(Error::Domain(format!(
                        "obstacle is positive ({val:e}) at boundary point {x:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Tolerance on the max norm of the nodal residual.
    pub tol: f64,
    pub max_iter: usize,
    pub contraction: f64,
    pub armijo: f64,
    pub max_line_search: usize,
    pub max_cycles: usize,
    /// Sweep budget of the projected Gauss–Seidel fallback.
    pub max_sweeps: usize,
    pub eps_reg: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            contraction: 0.5,
            armijo: 1e-4,
            max_line_search: 60,
            max_cycles: 50,
            max_sweeps: 5000,
            eps_reg: DEFAULT_EPS_REG,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Newton,
    GradientFlow,
    GaussSeidel,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub kind: StepKind,
    /// Max norm of the free residual after the step.
    pub residual: f64,
    pub energy: f64,
    pub step: f64,
    /// Active-set cycle the step belongs to (obstacle solves only).
    pub cycle: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct EquationSolution {
    pub u: FeFunction,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub log: Vec<IterationRecord>,
}

impl EquationSolution {
    pub fn ensure_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

#[derive(Clone, Debug)]
pub struct ObstacleSolution {
    pub u: FeFunction,
    /// Interior vertex ids where the constraint binds.
    pub active: Vec<usize>,
    /// `λ_h` per interior dof.
    pub multiplier: Vec<f64>,
    /// `℘_h ψ` as a P1 function.
    pub obstacle_h: FeFunction,
    pub converged: bool,
    pub cycles: usize,
    pub active_sizes: Vec<usize>,
    pub fallback_used: bool,
    pub residual: f64,
    pub log: Vec<IterationRecord>,
}

impl ObstacleSolution {
    /// `max_i (℘_hψ − u_h)_i⁺` over interior vertices.
    pub fn feasibility_violation(&self) -> f64 {
        let u = self.u.values();
        let psi = self.obstacle_h.values();
        let mesh = self.u.mesh();
        mesh.interior_vertices()
            .into_iter()
            .map(|v| (psi[v] - u[v]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// `max_i |λ_i (u_h − ℘_hψ)_i|`.
    pub fn complementarity(&self) -> f64 {
        let u = self.u.values();
        let psi = self.obstacle_h.values();
        self.u
            .mesh()
            .interior_vertices()
            .into_iter()
            .zip(&self.multiplier)
            .map(|(v, l)| (l * (u[v] - psi[v])).abs())
            .fold(0.0, f64::max)
    }

    /// `max_i (−λ_i)⁺`.
    pub fn multiplier_negativity(&self) -> f64 {
        self.multiplier.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_abs_free(v: &[f64], free: &[bool]) -> f64 {
    v.iter()
        .zip(free)
        .filter(|(_, &f)| f)
        .fold(0.0, |m, (x, _)| m.max(x.abs()))
}

/// Energy with an estimate of its rounding noise.
fn energy_with_noise(disc: &Discretization, u: &FeFunction) -> (f64, f64) {
    let m = gradient_modular(&disc.phi, &disc.quad, u);
    let b: f64 = disc
        .dofs
        .vertex_of_dof
        .iter()
        .map(|&i| disc.load[i] * u.values()[i])
        .sum();
    (m - b, 1e-12 * (m.abs() + b.abs()) + f64::MIN_POSITIVE)
}

/// `∫ ω ∇φ_j · ∇φ_i` over interior dofs, the metric of the gradient-flow step.
pub fn weighted_stiffness(disc: &Discretization) -> CsrMatrix {
    let mesh = &disc.mesh;
    let local: Vec<[[f64; 3]; 3]> = (0..mesh.num_cells())
        .map(|c| {
            let g = &mesh.geometry(c).grads;
            let w = disc.quad.cell_omega(c);
            std::array::from_fn(|i| std::array::from_fn(|j| w * (g[i][0] * g[j][0] + g[i][1] * g[j][1])))
        })
        .collect();
    disc.pattern.assemble(&local)
}

fn solve_free(m: &CsrMatrix, rhs: &[f64], free: &[bool]) -> Result<Vec<f64>> {
    let (sub, map) = m.principal_submatrix(free);
    let b: Vec<f64> = (0..free.len()).filter(|&i| free[i]).map(|i| rhs[i]).collect();
    let x = sub.solve_spd(&b)?;
    Ok(map.iter().map(|k| k.map_or(0.0, |k| x[k])).collect())
}

fn shifted(disc: &Discretization, u: &FeFunction, t: f64, d: &[f64]) -> FeFunction {
    let mut out = u.clone();
    let vals = out.values_mut();
    for (k, &v) in disc.dofs.vertex_of_dof.iter().enumerate() {
        vals[v] += t * d[k];
    }
    out
}

/// Backtracking line search on the energy along `d`; `slope = R · d < 0`.
///
/// Near convergence the Armijo decrease drops below the rounding noise of
/// the energy, so a full step whose energy increase is within that noise is
/// accepted when it reduces the residual.
fn line_search(
    disc: &Discretization,
    cfg: &SolverConfig,
    u: &FeFunction,
    e0: (f64, f64),
    r0: f64,
    d: &[f64],
    slope: f64,
    free: &[bool],
) -> Option<(FeFunction, f64, f64, f64)> {
    let mut t = 1.0;
    for k in 0..=cfg.max_line_search {
        let trial = shifted(disc, u, t, d);
        let (e, _) = energy_with_noise(disc, &trial);
        if e <= e0.0 + cfg.armijo * t * slope {
            let r = max_abs_free(&disc.residual(&trial), free);
            return Some((trial, e, r, t));
        }
        if k == 0 && e <= e0.0 + e0.1 {
            let r = max_abs_free(&disc.residual(&trial), free);
            if r < r0 {
                return Some((trial, e, r, t));
            }
        }
        t *= cfg.contraction;
    }
    None
}

/// Newton iteration on the `free` interior dofs; the others keep their
/// values in `u`.
fn newton_on(
    disc: &Discretization,
    cfg: &SolverConfig,
    mut u: FeFunction,
    free: &[bool],
    log: &mut Vec<IterationRecord>,
    cycle: Option<usize>,
) -> Result<(FeFunction, bool, usize, f64)> {
    let mut stiffness: Option<CsrMatrix> = None;
    let mut res = disc.residual(&u);
    let mut r = max_abs_free(&res, free);
    let mut energy = energy_with_noise(disc, &u);
    let mut it = 0;
    while r > cfg.tol {
        if it >= cfg.max_iter {
            return Ok((u, false, it, r));
        }
        it += 1;
        let neg: Vec<f64> = res.iter().map(|x| -x).collect();
        let m = disc.newton_matrix(&u, cfg.eps_reg);
        let mut kind = StepKind::Newton;
        let mut d = solve_free(&m, &neg, free)?;
        let mut slope = slope_of(&res, &d, free);
        let mut accepted = if slope < 0.0 {
            line_search(disc, cfg, &u, energy, r, &d, slope, free)
        } else {
            None
        };
        if accepted.is_none() {
            kind = StepKind::GradientFlow;
            let k = stiffness.get_or_insert_with(|| weighted_stiffness(disc));
            d = solve_free(k, &neg, free)?;
            slope = slope_of(&res, &d, free);
            accepted = line_search(disc, cfg, &u, energy, r, &d, slope, free);
        }
        let Some((next, e, rn, t)) = accepted else {
            // no descent is measurable any more: stagnation
            return Ok((u, false, it, r));
        };
        u = next;
        energy = energy_with_noise(disc, &u);
        debug_assert!(energy.0 == e);
        res = disc.residual(&u);
        r = rn;
        log.push(IterationRecord {
            iteration: it,
            kind,
            residual: r,
            energy: e,
            step: t,
            cycle,
        });
    }
    Ok((u, true, it, r))
}

fn slope_of(res: &[f64], d: &[f64], free: &[bool]) -> f64 {
    res.iter()
        .zip(d)
        .zip(free)
        .filter(|(_, &f)| f)
        .map(|((a, b), _)| a * b)
        .sum()
}

/// Solves the discrete equation by damped Newton, starting from `initial`
/// (zero if absent).
pub fn solve_equation(
    disc: &Discretization,
    cfg: &SolverConfig,
    initial: Option<FeFunction>,
) -> Result<EquationSolution> {
    faer::set_global_parallelism(faer::Par::Seq);
    let u0 = initial.unwrap_or_else(|| FeFunction::zeros(&disc.mesh)).constrained();
    let free = vec![true; disc.dofs.len()];
    let mut log = Vec::new();
    let (u, converged, iterations, residual) = newton_on(disc, cfg, u0, &free, &mut log, None)?;
    Ok(EquationSolution {
        u,
        converged,
        iterations,
        residual,
        log,
    })
}

/// `λ_h,i = ∫ ω A(∇u_h) · ∇φ_i − b(φ_i)` over the interior dofs.
pub fn discrete_multiplier(disc: &Discretization, u: &FeFunction) -> Vec<f64> {
    disc.residual(u)
}

fn set_hash(active: &[bool]) -> Vec<u64> {
    let mut bits = vec![0u64; active.len().div_ceil(64)];
    for (i, &a) in active.iter().enumerate() {
        if a {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

/// Scalar residual and its derivative at interior vertex `v`.
fn local_residual(disc: &Discretization, u: &FeFunction, v: usize, eps_reg: f64) -> (f64, f64) {
    let mesh = &disc.mesh;
    let mut r = -disc.load[v];
    let mut dr = 0.0;
    for &c in mesh.vertex_cells(v) {
        let i = mesh.cells()[c].iter().position(|&w| w == v).unwrap();
        let gi = mesh.geometry(c).grads[i];
        let z = u.gradient(c);
        let w = disc.quad.cell_omega(c);
        let a = disc.phi.vector_a(&z);
        let da = disc.phi.linearized_a(&z, eps_reg);
        r += w * (a[0] * gi[0] + a[1] * gi[1]);
        let dg = [da[0][0] * gi[0] + da[0][1] * gi[1], da[1][0] * gi[0] + da[1][1] * gi[1]];
        dr += w * (dg[0] * gi[0] + dg[1] * gi[1]);
    }
    (r, dr)
}

/// Projected nonlinear Gauss–Seidel: nodewise constrained minimization in
/// vertex order until the complementarity residual is below `tol`.
fn projected_gauss_seidel(
    disc: &Discretization,
    cfg: &SolverConfig,
    mut u: FeFunction,
    psi: &[f64],
    log: &mut Vec<IterationRecord>,
    cycle: usize,
) -> FeFunction {
    let verts = disc.dofs.vertex_of_dof.clone();
    for sweep in 1..=cfg.max_sweeps {
        for (k, &v) in verts.iter().enumerate() {
            // scalar safeguarded Newton on the node's residual
            for _ in 0..30 {
                let (r, dr) = local_residual(disc, &u, v, cfg.eps_reg);
                if dr <= 0.0 || !dr.is_finite() {
                    break;
                }
                let cur = u.values()[v];
                let next = (cur - r / dr).max(psi[k]);
                u.values_mut()[v] = next;
                if (next - cur).abs() <= 1e-15 * (1.0 + cur.abs()) {
                    break;
                }
            }
        }
        let res = disc.residual(&u);
        let crit = verts
            .iter()
            .enumerate()
            .map(|(k, &v)| res[k].min(u.values()[v] - psi[k]).abs())
            .fold(0.0, f64::max);
        log.push(IterationRecord {
            iteration: sweep,
            kind: StepKind::GaussSeidel,
            residual: crit,
            energy: energy_with_noise(disc, &u).0,
            step: 1.0,
            cycle: Some(cycle),
        });
        if crit <= cfg.tol {
            break;
        }
    }
    u
}

/// Solves the discrete obstacle problem `u_h ≥ ℘_hψ` by primal-dual active
/// sets with pinned nodes, falling back to projected Gauss–Seidel when an
/// active set repeats.
pub fn solve_obstacle(
    ps: &ProblemSpec,
    disc: &Discretization,
    cfg: &SolverConfig,
    initial: Option<FeFunction>,
) -> Result<ObstacleSolution> {
    faer::set_global_parallelism(faer::Par::Seq);
    let psi_fn = ps
        .obstacle
        .as_ref()
        .ok_or_else(|| Error::Domain("problem has no obstacle".into()))?;
    ps.check_obstacle_trace(&disc.mesh)?;
    let pp = PpInterpolant::new(&disc.mesh);
    let obstacle_h = pp.apply_fn(|x| psi_fn(x));
    let psi = disc.dofs.restrict(&obstacle_h);
    let n = disc.dofs.len();
    let verts = disc.dofs.vertex_of_dof.clone();

    // feasible start: max(0, ℘_hψ), or the warm start lifted onto the constraint
    let mut u = match initial {
        Some(u0) => u0.constrained(),
        None => FeFunction::zeros(&disc.mesh),
    };
    for (k, &v) in verts.iter().enumerate() {
        let val = u.values()[v].max(psi[k]);
        u.values_mut()[v] = val;
    }

    let mut log = Vec::new();
    let mut seen = HashSet::new();
    let mut active_sizes = Vec::new();
    let mut fallback_used = false;
    let mut active = vec![false; n];
    {
        let lambda = disc.residual(&u);
        let c = disc.newton_matrix(&u, cfg.eps_reg).diagonal();
        for k in 0..n {
            active[k] = lambda[k] + c[k] * (psi[k] - u.values()[verts[k]]) > 0.0;
        }
    }
    let mut cycles = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;
    while cycles < cfg.max_cycles {
        cycles += 1;
        active_sizes.push(active.iter().filter(|&&a| a).count());
        seen.insert(set_hash(&active));
        for k in 0..n {
            if active[k] {
                u.values_mut()[verts[k]] = psi[k];
            }
        }
        let free: Vec<bool> = active.iter().map(|a| !a).collect();
        let (next, ok, _, r) = newton_on(disc, cfg, u, &free, &mut log, Some(cycles))?;
        u = next;
        residual = r;
        let lambda = disc.residual(&u);
        let c = disc.newton_matrix(&u, cfg.eps_reg).diagonal();
        let new_active: Vec<bool> = (0..n)
            .map(|k| lambda[k] + c[k] * (psi[k] - u.values()[verts[k]]) > 0.0)
            .collect();
        if ok && new_active == active {
            converged = true;
            break;
        }
        if seen.contains(&set_hash(&new_active)) || !ok {
            fallback_used = true;
            u = projected_gauss_seidel(disc, cfg, u, &psi, &mut log, cycles);
            // restart the active-set loop from the Gauss–Seidel contact set
            let lambda = disc.residual(&u);
            let c = disc.newton_matrix(&u, cfg.eps_reg).diagonal();
            active = (0..n)
                .map(|k| lambda[k] + c[k] * (psi[k] - u.values()[verts[k]]) > 0.0)
                .collect();
            seen.clear();
            continue;
        }
        active = new_active;
    }
    let multiplier = discrete_multiplier(disc, &u);
    let active_ids = (0..n).filter(|&k| active[k]).map(|k| verts[k]).collect();
    Ok(ObstacleSolution {
        u,
        active: active_ids,
        multiplier,
        obstacle_h,
        converged,
        cycles,
        active_sizes,
        fallback_used,
        residual,
        log,
    })
}

/// Summary written by the `solve` command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub residuals: Vec<f64>,
    pub energies: Vec<f64>,
    pub steps: Vec<IterationRecord>,
    pub active_set_sizes: Vec<usize>,
    pub fallback_used: bool,
    pub feasibility_violation: Option<f64>,
    pub complementarity: Option<f64>,
    pub max_multiplier: Option<f64>,
}

impl SolveReport {
    pub fn from_equation(s: &EquationSolution) -> Self {
        Self {
            converged: s.converged,
            iterations: s.iterations,
            final_residual: s.residual,
            residuals: s.log.iter().map(|r| r.residual).collect(),
            energies: s.log.iter().map(|r| r.energy).collect(),
            steps: s.log.clone(),
            active_set_sizes: Vec::new(),
            fallback_used: false,
            feasibility_violation: None,
            complementarity: None,
            max_multiplier: None,
        }
    }

    pub fn from_obstacle(s: &ObstacleSolution) -> Self {
        Self {
            converged: s.converged,
            iterations: s.log.len(),
            final_residual: s.residual,
            residuals: s.log.iter().map(|r| r.residual).collect(),
            energies: s.log.iter().map(|r| r.energy).collect(),
            steps: s.log.clone(),
            active_set_sizes: s.active_sizes.clone(),
            fallback_used: s.fallback_used,
            feasibility_violation: Some(s.feasibility_violation()),
            complementarity: Some(s.complementarity()),
            max_multiplier: Some(max_abs(&s.multiplier)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femcore::RhsFunctional;
    use crate::mesh::Pattern;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn unit(n: usize) -> Arc<SimplicialMesh> {
        Arc::new(SimplicialMesh::structured_rect(n, n, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross).unwrap())
    }

    fn poisson_spec() -> ProblemSpec {
        ProblemSpec {
            phi: NFunction::power(2.0).unwrap(),
            weight: Weight::one(),
            rhs: RhsFunctional::analytic(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()),
            obstacle: None,
            exact: None,
        }
    }

    #[test]
    fn poisson_matches_direct_linear_solve() {
        let m = unit(8);
        let disc = poisson_spec().discretize(&m, 6);
        let sol = solve_equation(&disc, &SolverConfig::default(), None).unwrap();
        assert!(sol.converged && sol.iterations <= 2);
        // oracle: one linear solve with the plain stiffness matrix
        let k = weighted_stiffness(&disc);
        let b: Vec<f64> = disc.dofs.vertex_of_dof.iter().map(|&v| disc.load[v]).collect();
        let x = k.solve_spd(&b).unwrap();
        let u = disc.dofs.restrict(&sol.u);
        for (a, b) in u.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_l2_error_is_second_order() {
        let mut errs = Vec::new();
        for n in [8, 16] {
            let m = unit(n);
            let disc = poisson_spec().discretize(&m, 6);
            let u = solve_equation(&disc, &SolverConfig::default(), None).unwrap().u;
            let e = disc
                .quad
                .integrate_unweighted(|c, q| {
                    let d = u.eval_bary(c, &q.bary) - (PI * q.x[0]).sin() * (PI * q.x[1]).sin();
                    d * d
                })
                .sqrt();
            errs.push(e);
        }
        let eoc = (errs[0] / errs[1]).log2();
        assert!(eoc > 1.8, "eoc {eoc}");
    }

    #[test]
    fn zero_rhs_gives_zero_immediately() {
        let m = unit(4);
        let spec = ProblemSpec {
            rhs: RhsFunctional::zero(),
            phi: NFunction::power(3.0).unwrap(),
            ..poisson_spec()
        };
        let sol = solve_equation(&spec.discretize(&m, 6), &SolverConfig::default(), None).unwrap();
        assert!(sol.converged && sol.iterations <= 1);
        assert!(sol.u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonlinear_solution_minimizes_energy() {
        let m = unit(6);
        let c = [0.5, 0.5];
        let spec = ProblemSpec {
            phi: NFunction::shifted_power(3.0, 0.1).unwrap(),
            weight: Weight::radial_power(c, 0.5),
            rhs: RhsFunctional::exact_gradient(|x| [PI * (PI * x[0]).cos() * (PI * x[1]).sin(), PI * (PI * x[0]).sin() * (PI * x[1]).cos()]),
            obstacle: None,
            exact: None,
        };
        let disc = spec.discretize(&m, 6);
        let sol = solve_equation(&disc, &SolverConfig::default(), None).unwrap();
        assert!(sol.converged, "{:?}", sol.log.last());
        assert!(max_abs(&disc.residual(&sol.u)) <= 1e-10);
        let energies: Vec<f64> = sol.log.iter().map(|r| r.energy).collect();
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        let j0 = disc.energy(&sol.u);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d: Vec<f64> = (0..disc.dofs.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let df = disc.dofs.extend(&m, &d);
            for t in [1e-3, -1e-3, 1e-2, -1e-2] {
                assert!(disc.energy(&sol.u.axpy(t, &df)) >= j0);
            }
        }
    }

    #[test]
    fn p_below_two_converges() {
        let m = unit(6);
        let spec = ProblemSpec {
            phi: NFunction::power(1.5).unwrap(),
            ..poisson_spec()
        };
        let sol = solve_equation(&spec.discretize(&m, 6), &SolverConfig::default(), None).unwrap();
        assert!(sol.converged, "{:?}", sol.log.last());
    }

    #[test]
    fn slack_obstacle_reproduces_equation() {
        let m = unit(6);
        let mut spec = poisson_spec();
        spec.phi = NFunction::power(2.5).unwrap();
        let disc = spec.discretize(&m, 6);
        let eq = solve_equation(&disc, &SolverConfig::default(), None).unwrap();
        spec.obstacle = Some(Arc::new(|_| -1e6));
        let ob = solve_obstacle(&spec, &disc, &SolverConfig::default(), None).unwrap();
        assert!(ob.converged && ob.active.is_empty());
        for (a, b) in ob.u.values().iter().zip(eq.u.values()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(max_abs(&ob.multiplier) <= 1e-10);
    }

    #[test]
    fn raising_the_obstacle_never_lowers_the_solution() {
        let m = unit(8);
        let mut prev: Option<FeFunction> = None;
        for level in [0.02, 0.05, 0.1] {
            let spec = ProblemSpec {
                phi: NFunction::power(2.0).unwrap(),
                weight: Weight::one(),
                rhs: RhsFunctional::analytic(|_| -1.0),
                obstacle: Some(Arc::new(move |x| {
                    let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
                    level - r2
                })),
                exact: None,
            };
            let disc = spec.discretize(&m, 6);
            let ob = solve_obstacle(&spec, &disc, &SolverConfig::default(), None).unwrap();
            assert!(ob.converged);
            assert!(!ob.active.is_empty());
            assert!(ob.feasibility_violation() == 0.0);
            assert!(ob.multiplier_negativity() <= 1e-10);
            assert!(ob.complementarity() <= 1e-10);
            if let Some(p) = &prev {
                for (a, b) in ob.u.values().iter().zip(p.values()) {
                    assert!(*a >= b - 1e-12);
                }
            }
            prev = Some(ob.u);
        }
    }

    #[test]
    fn gauss_seidel_fallback_solves_the_obstacle_problem() {
        let m = unit(6);
        let spec = ProblemSpec {
            phi: NFunction::power(2.0).unwrap(),
            weight: Weight::one(),
            rhs: RhsFunctional::analytic(|_| -1.0),
            obstacle: Some(Arc::new(|x| 0.05 - (x[0] - 0.5).powi(2) - (x[1] - 0.5).powi(2))),
            exact: None,
        };
        let disc = spec.discretize(&m, 6);
        let cfg = SolverConfig::default();
        let pp = PpInterpolant::new(&m);
        let psi = disc.dofs.restrict(&pp.apply_fn(|x| spec.obstacle.as_ref().unwrap()(x)));
        let mut log = Vec::new();
        let u0 = disc.dofs.extend(&m, &psi.iter().map(|p| p.max(0.0)).collect::<Vec<_>>());
        let u = projected_gauss_seidel(&disc, &cfg, u0, &psi, &mut log, 1);
        let reference = solve_obstacle(&spec, &disc, &cfg, None).unwrap();
        for (a, b) in u.values().iter().zip(reference.u.values()) {
            assert!((a - b).abs() < 1e-8);
        }
    }
}
