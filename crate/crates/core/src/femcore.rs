//! P1 finite element spaces, weighted quadrature, modulars and Luxemburg
//! norms, the discrete energy, and assembly of the nonlinear residual and its
//! Newton matrix.
//!
//! Gradients of P1 functions are constant per cell, so energy, residual and
//! Newton matrix only need the cell integrals `ω(T) = ∫_T ω`; quadrature
//! nodes are used for loads, modulars of function values, and error norms.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{parse_fields, Point, SimplicialMesh};
use crate::nfunc::NFunction;
use crate::quad::{self, QuadratureRule};
use crate::weight::Weight;

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Refinement levels applied to cells containing a weight singularity.
pub const SINGULAR_LEVELS: usize = 2;

/// A continuous piecewise linear function given by its nodal values.
#[derive(Clone, Debug)]
pub struct FeFunction {
    mesh: Arc<SimplicialMesh>,
    values: Vec<f64>,
    boundary_constrained: bool,
}

impl FeFunction {
    pub fn zeros(mesh: &Arc<SimplicialMesh>) -> Self {
        Self {
            mesh: mesh.clone(),
            values: vec![0.0; mesh.num_vertices()],
            boundary_constrained: true,
        }
    }

    /// A function in the full P1 space.
    pub fn from_values(mesh: &Arc<SimplicialMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::Domain(format!(
                "expected {} nodal values, got {}",
                mesh.num_vertices(),
                values.len()
            )));
        }
        Ok(Self {
            mesh: mesh.clone(),
            values,
            boundary_constrained: false,
        })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &Arc<SimplicialMesh>, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.vertices().iter().map(|&x| f(x)).collect();
        Self {
            mesh: mesh.clone(),
            values,
            boundary_constrained: false,
        }
    }

    /// Sets the boundary nodal values to zero and marks the function as an
    /// element of the zero-trace space.
    pub fn constrained(mut self) -> Self {
        for (v, x) in self.values.iter_mut().enumerate() {
            if self.mesh.is_boundary_vertex(v) {
                *x = 0.0;
            }
        }
        self.boundary_constrained = true;
        self
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_boundary_constrained(&self) -> bool {
        self.boundary_constrained
    }

    pub fn gradient(&self, cell: usize) -> [f64; 2] {
        let c = self.mesh.cells()[cell];
        let g = &self.mesh.geometry(cell).grads;
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += self.values[c[i]] * g[i][0];
            out[1] += self.values[c[i]] * g[i][1];
        }
        out
    }

    pub fn eval_bary(&self, cell: usize, bary: &[f64; 3]) -> f64 {
        let c = self.mesh.cells()[cell];
        bary[0] * self.values[c[0]] + bary[1] * self.values[c[1]] + bary[2] * self.values[c[2]]
    }

    /// Point evaluation (linear search for the containing cell).
    pub fn eval(&self, x: Point) -> Option<f64> {
        self.mesh.locate(x).map(|(c, b)| self.eval_bary(c, &b))
    }

    /// `self + a · other` on the same mesh.
    pub fn axpy(&self, a: f64, other: &FeFunction) -> FeFunction {
        let mut out = self.clone();
        for (x, y) in out.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        out.boundary_constrained = self.boundary_constrained && other.boundary_constrained;
        out
    }

    pub fn scaled(&self, a: f64) -> FeFunction {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|x| *x *= a);
        out
    }

    /// Prolongation to a uniform refinement of the underlying mesh.
    pub fn prolongate(&self, fine: &Arc<SimplicialMesh>, midpoint_parents: &[[usize; 2]]) -> FeFunction {
        let mut values = self.values.clone();
        values.extend(
            midpoint_parents
                .iter()
                .map(|&[a, b]| 0.5 * (self.values[a] + self.values[b])),
        );
        assert_eq!(values.len(), fine.num_vertices(), "refinement does not match");
        FeFunction {
            mesh: fine.clone(),
            values,
            boundary_constrained: self.boundary_constrained,
        }
    }

    /// Mesh text followed by one nodal value per line.
    pub fn to_text(&self) -> String {
        let mut s = self.mesh.to_text();
        for v in &self.values {
            writeln!(s, "{v:?}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mesh = Arc::new(SimplicialMesh::read_lines(&mut lines)?);
        let mut values = Vec::with_capacity(mesh.num_vertices());
        for _ in 0..mesh.num_vertices() {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("missing nodal values".into()))?;
            let f: Vec<f64> = parse_fields(line)?;
            if f.len() != 1 {
                return Err(Error::Parse(format!("bad nodal value line '{line}'")));
            }
            values.push(f[0]);
        }
        let constrained = (0..mesh.num_vertices())
            .all(|v| !mesh.is_boundary_vertex(v) || values[v] == 0.0);
        Ok(Self {
            mesh,
            values,
            boundary_constrained: constrained,
        })
    }
}

/// Numbering of interior vertices (the unknowns of the zero-trace space).
#[derive(Clone, Debug)]
pub struct DofMap {
    pub dof_of_vertex: Vec<Option<usize>>,
    pub vertex_of_dof: Vec<usize>,
}

impl DofMap {
    pub fn interior(mesh: &SimplicialMesh) -> Self {
        let vertex_of_dof = mesh.interior_vertices();
        let mut dof_of_vertex = vec![None; mesh.num_vertices()];
        for (d, &v) in vertex_of_dof.iter().enumerate() {
            dof_of_vertex[v] = Some(d);
        }
        Self {
            dof_of_vertex,
            vertex_of_dof,
        }
    }

    pub fn len(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_of_dof.is_empty()
    }

    pub fn restrict(&self, f: &FeFunction) -> Vec<f64> {
        self.vertex_of_dof.iter().map(|&v| f.values()[v]).collect()
    }

    pub fn extend(&self, mesh: &Arc<SimplicialMesh>, x: &[f64]) -> FeFunction {
        let mut f = FeFunction::zeros(mesh);
        for (d, &v) in self.vertex_of_dof.iter().enumerate() {
            f.values[v] = x[d];
        }
        f
    }
}

/// One quadrature node on a cell.
#[derive(Clone, Copy, Debug)]
pub struct QuadNode {
    pub x: Point,
    pub bary: [f64; 3],
    /// Geometric weight (sums to the cell area).
    pub w: f64,
    /// `w · ω(x)`.
    pub ww: f64,
}

/// Per-cell quadrature nodes for a weight, refined near weight singularities.
#[derive(Clone, Debug)]
pub struct WeightedQuadrature {
    pub degree: usize,
    offsets: Vec<usize>,
    nodes: Vec<QuadNode>,
    cell_omega: Vec<f64>,
}

impl WeightedQuadrature {
    pub fn new(mesh: &SimplicialMesh, weight: &Weight, degree: usize) -> Self {
        let rule = QuadratureRule::triangle(degree);
        let sing = weight.singular_points();
        let per_cell: Vec<Vec<QuadNode>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                quad::triangle_nodes(mesh.cell_points(c), &rule, &sing, SINGULAR_LEVELS)
                    .into_iter()
                    .map(|(bary, w)| {
                        let x = mesh.map_point(c, &bary);
                        QuadNode {
                            x,
                            bary,
                            w,
                            ww: w * weight.eval(x),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut offsets = Vec::with_capacity(mesh.num_cells() + 1);
        offsets.push(0);
        let mut nodes = Vec::new();
        let mut cell_omega = Vec::with_capacity(mesh.num_cells());
        for cell in per_cell {
            cell_omega.push(cell.iter().map(|n| n.ww).sum());
            nodes.extend(cell);
            offsets.push(nodes.len());
        }
        Self {
            degree,
            offsets,
            nodes,
            cell_omega,
        }
    }

    pub fn nodes(&self, cell: usize) -> &[QuadNode] {
        &self.nodes[self.offsets[cell]..self.offsets[cell + 1]]
    }

    pub fn num_cells(&self) -> usize {
        self.cell_omega.len()
    }

    /// `ω(T)`.
    pub fn cell_omega(&self, cell: usize) -> f64 {
        self.cell_omega[cell]
    }

    pub fn total_omega(&self) -> f64 {
        self.cell_omega.iter().sum()
    }

    /// `∫_Ω ω g`.
    pub fn integrate(&self, g: impl Fn(usize, &QuadNode) -> f64 + Sync) -> f64 {
        (0..self.num_cells())
            .into_par_iter()
            .map(|c| self.nodes(c).iter().map(|n| n.ww * g(c, n)).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }

    /// `∫_Ω g` without the weight.
    pub fn integrate_unweighted(&self, g: impl Fn(usize, &QuadNode) -> f64 + Sync) -> f64 {
        (0..self.num_cells())
            .into_par_iter()
            .map(|c| self.nodes(c).iter().map(|n| n.w * g(c, n)).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }
}

/// Samples `(ω-weight, |g|)` of a field at quadrature nodes, from which
/// modulars and Luxemburg norms are computed.
#[derive(Clone, Debug)]
pub struct ModularSamples(pub Vec<(f64, f64)>);

impl ModularSamples {
    /// `|∇v|`, constant per cell, weighted by `ω(T)`.
    pub fn gradient(q: &WeightedQuadrature, v: &FeFunction) -> Self {
        Self(
            (0..q.num_cells())
                .map(|c| {
                    let g = v.gradient(c);
                    (q.cell_omega(c), g[0].hypot(g[1]))
                })
                .collect(),
        )
    }

    /// `|v|` at quadrature nodes.
    pub fn values(q: &WeightedQuadrature, v: &FeFunction) -> Self {
        let mut out = Vec::new();
        for c in 0..q.num_cells() {
            for n in q.nodes(c) {
                out.push((n.ww, v.eval_bary(c, &n.bary).abs()));
            }
        }
        Self(out)
    }

    /// `|g(x)|` at quadrature nodes.
    pub fn field(q: &WeightedQuadrature, g: impl Fn(usize, &QuadNode) -> f64) -> Self {
        let mut out = Vec::new();
        for c in 0..q.num_cells() {
            for n in q.nodes(c) {
                out.push((n.ww, g(c, n).abs()));
            }
        }
        Self(out)
    }

    /// `Σ ω Φ(|g| / k)`.
    pub fn modular_scaled(&self, phi: &NFunction, k: f64) -> f64 {
        self.0.iter().map(|&(w, g)| w * phi.phi(g / k)).sum()
    }

    pub fn modular(&self, phi: &NFunction) -> f64 {
        self.modular_scaled(phi, 1.0)
    }

    /// `inf{k > 0 : modular(g/k) ≤ 1}` by bracketing and bisection.
    pub fn luxemburg(&self, phi: &NFunction) -> Result<f64> {
        if self.0.iter().all(|&(w, g)| w * g == 0.0) {
            return Ok(0.0);
        }
        let m = |k: f64| self.modular_scaled(phi, k);
        let mut lo;
        let mut hi;
        if m(1.0) > 1.0 {
            lo = 1.0;
            hi = 2.0;
            while !(m(hi) <= 1.0) {
                lo = hi;
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::Divergent("modular exceeds 1 at every scale".into()));
                }
            }
        } else {
            hi = 1.0;
            lo = 0.5;
            while m(lo) <= 1.0 {
                hi = lo;
                lo *= 0.5;
                if lo < 1e-300 {
                    return Ok(0.0);
                }
            }
        }
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if m(mid) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// `∫ ω Φ(|∇v|)`.
pub fn gradient_modular(phi: &NFunction, q: &WeightedQuadrature, v: &FeFunction) -> f64 {
    (0..q.num_cells())
        .map(|c| {
            let g = v.gradient(c);
            q.cell_omega(c) * phi.phi(g[0].hypot(g[1]))
        })
        .sum()
}

/// Right-hand side functional `b(v) = main(v) + ∫ s v`.
#[derive(Clone)]
pub enum RhsMode {
    /// `∫ ω f v`.
    AnalyticF(ScalarField),
    /// `∫ ω A(∇u_ex) · ∇v`, which makes `u_ex` the exact weak solution.
    ExactGradient(VectorField),
    Zero,
}

#[derive(Clone)]
pub struct RhsFunctional {
    pub mode: RhsMode,
    /// Optional unweighted source `s`, contributing `∫ s v`.
    pub source: Option<ScalarField>,
}

impl RhsFunctional {
    pub fn analytic(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            mode: RhsMode::AnalyticF(Arc::new(f)),
            source: None,
        }
    }

    pub fn exact_gradient(g: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self {
            mode: RhsMode::ExactGradient(Arc::new(g)),
            source: None,
        }
    }

    pub fn zero() -> Self {
        Self {
            mode: RhsMode::Zero,
            source: None,
        }
    }

    pub fn with_source(mut self, s: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(s));
        self
    }

    /// Load vector `b(φ_v)` for every vertex of the mesh.
    pub fn assemble(&self, phi: &NFunction, mesh: &SimplicialMesh, q: &WeightedQuadrature) -> Vec<f64> {
        let local: Vec<[f64; 3]> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let g = &mesh.geometry(c).grads;
                let mut b = [0.0; 3];
                for n in q.nodes(c) {
                    match &self.mode {
                        RhsMode::AnalyticF(f) => {
                            let fx = f(n.x);
                            for i in 0..3 {
                                b[i] += n.ww * fx * n.bary[i];
                            }
                        }
                        RhsMode::ExactGradient(grad) => {
                            let a = phi.vector_a(&grad(n.x));
                            for i in 0..3 {
                                b[i] += n.ww * (a[0] * g[i][0] + a[1] * g[i][1]);
                            }
                        }
                        RhsMode::Zero => {}
                    }
                    if let Some(s) = &self.source {
                        let sx = s(n.x);
                        for i in 0..3 {
                            b[i] += n.w * sx * n.bary[i];
                        }
                    }
                }
                b
            })
            .collect();
        let mut out = vec![0.0; mesh.num_vertices()];
        for (c, b) in local.iter().enumerate() {
            for (i, &v) in mesh.cells()[c].iter().enumerate() {
                out[v] += b[i];
            }
        }
        out
    }
}

/// The data shared by energy, residual and Newton assembly on one mesh.
#[derive(Clone)]
pub struct Discretization {
    pub mesh: Arc<SimplicialMesh>,
    pub phi: NFunction,
    pub weight: Weight,
    pub quad: WeightedQuadrature,
    pub dofs: DofMap,
    /// `b(φ_v)` for every vertex.
    pub load: Vec<f64>,
    pub pattern: CsrPattern,
}

impl Discretization {
    pub fn new(
        mesh: Arc<SimplicialMesh>,
        phi: NFunction,
        weight: Weight,
        rhs: &RhsFunctional,
        degree: usize,
    ) -> Self {
        let quad = WeightedQuadrature::new(&mesh, &weight, degree);
        let load = rhs.assemble(&phi, &mesh, &quad);
        let dofs = DofMap::interior(&mesh);
        let pattern = CsrPattern::new(&mesh, &dofs);
        Self {
            mesh,
            phi,
            weight,
            quad,
            dofs,
            load,
            pattern,
        }
    }

    /// `𝒥(v) = ∫ ω Φ(|∇v|) − b(v)`.
    pub fn energy(&self, v: &FeFunction) -> f64 {
        let m = gradient_modular(&self.phi, &self.quad, v);
        let b: f64 = self
            .dofs
            .vertex_of_dof
            .iter()
            .map(|&i| self.load[i] * v.values()[i])
            .sum();
        m - b
    }

    /// `∫ ω A(∇u) · ∇φ_v` for every vertex.
    pub fn flux_vector(&self, u: &FeFunction) -> Vec<f64> {
        let mesh = &self.mesh;
        let local: Vec<[f64; 3]> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let a = self.phi.vector_a(&u.gradient(c));
                let g = &mesh.geometry(c).grads;
                let w = self.quad.cell_omega(c);
                std::array::from_fn(|i| w * (a[0] * g[i][0] + a[1] * g[i][1]))
            })
            .collect();
        let mut out = vec![0.0; mesh.num_vertices()];
        for (c, r) in local.iter().enumerate() {
            for (i, &v) in mesh.cells()[c].iter().enumerate() {
                out[v] += r[i];
            }
        }
        out
    }

    /// `R_i = ∫ ω A(∇u) · ∇φ_i − b(φ_i)` over the interior vertices.
    pub fn residual(&self, u: &FeFunction) -> Vec<f64> {
        let flux = self.flux_vector(u);
        self.dofs
            .vertex_of_dof
            .iter()
            .map(|&v| flux[v] - self.load[v])
            .collect()
    }

    /// `M_ij = ∫ ω ∇φ_j · DA(∇u) ∇φ_i` over the interior vertices.
    pub fn newton_matrix(&self, u: &FeFunction, eps_reg: f64) -> CsrMatrix {
        let mesh = &self.mesh;
        let local: Vec<[[f64; 3]; 3]> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let da = self.phi.linearized_a(&u.gradient(c), eps_reg);
                let g = &mesh.geometry(c).grads;
                let w = self.quad.cell_omega(c);
                let mut k = [[0.0; 3]; 3];
                for i in 0..3 {
                    let dg = [
                        da[0][0] * g[i][0] + da[0][1] * g[i][1],
                        da[1][0] * g[i][0] + da[1][1] * g[i][1],
                    ];
                    for j in 0..3 {
                        k[j][i] = w * (dg[0] * g[j][0] + dg[1] * g[j][1]);
                    }
                }
                // exact symmetry regardless of rounding in DA
                for i in 0..3 {
                    for j in 0..i {
                        let s = 0.5 * (k[i][j] + k[j][i]);
                        k[i][j] = s;
                        k[j][i] = s;
                    }
                }
                k
            })
            .collect();
        self.pattern.assemble(&local)
    }
}

/// Sparsity pattern over interior dofs with per-cell scatter positions.
#[derive(Clone, Debug)]
pub struct CsrPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    /// `slots[c][3 * i + j]` is the storage index of `(dof(i), dof(j))`.
    slots: Vec<[Option<usize>; 9]>,
}

impl CsrPattern {
    pub fn new(mesh: &SimplicialMesh, dofs: &DofMap) -> Self {
        let n = dofs.len();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in mesh.cells() {
            for &a in c {
                if let Some(i) = dofs.dof_of_vertex[a] {
                    for &b in c {
                        if let Some(j) = dofs.dof_of_vertex[b] {
                            rows[i].push(j);
                        }
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let find = |i: usize, j: usize| -> usize {
            let s = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            row_ptr[i] + s.binary_search(&j).expect("entry in pattern")
        };
        let slots = mesh
            .cells()
            .iter()
            .map(|c| {
                let mut s = [None; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(i), Some(j)) =
                            (dofs.dof_of_vertex[c[a]], dofs.dof_of_vertex[c[b]])
                        {
                            s[3 * a + b] = Some(find(i, j));
                        }
                    }
                }
                s
            })
            .collect();
        Self {
            n,
            row_ptr,
            col_idx,
            slots,
        }
    }

    /// Sums local matrices in cell order.
    pub fn assemble(&self, local: &[[[f64; 3]; 3]]) -> CsrMatrix {
        let mut values = vec![0.0; self.col_idx.len()];
        for (c, k) in local.iter().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    if let Some(s) = self.slots[c][3 * a + b] {
                        values[s] += k[a][b];
                    }
                }
            }
        }
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }
}

/// Square sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let s = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        s.binary_search(&j)
            .map(|k| self.values[self.row_ptr[i] + k])
            .unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// `max |M_ij − M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m = m.max((self.values[k] - self.get(self.col_idx[k], i)).abs());
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Principal submatrix on the rows/columns where `keep` is true, with
    /// the map from old to new indices.
    pub fn principal_submatrix(&self, keep: &[bool]) -> (CsrMatrix, Vec<Option<usize>>) {
        let mut map = vec![None; self.n];
        let mut m = 0;
        for i in 0..self.n {
            if keep[i] {
                map[i] = Some(m);
                m += 1;
            }
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n {
            if !keep[i] {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if let Some(j) = map[self.col_idx[k]] {
                    col_idx.push(j);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        (
            CsrMatrix {
                n: m,
                row_ptr,
                col_idx,
                values,
            },
            map,
        )
    }

    /// Solves `M x = b` for symmetric positive definite `M` by sparse Cholesky.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        use faer::linalg::solvers::Solve;
        use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
        use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
        use faer::{Mat, Side};
        if self.n == 0 {
            return Ok(Vec::new());
        }
        // a symmetric CSR matrix is its own CSC transpose
        let sym = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.col_idx);
        let mat = SparseColMatRef::new(sym, &self.values);
        let symbolic = SymbolicLlt::try_new(sym, Side::Lower)
            .map_err(|e| Error::Numerical(format!("symbolic factorization failed: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(symbolic, mat, Side::Lower)
            .map_err(|e| Error::Numerical(format!("Cholesky factorization failed: {e:?}")))?;
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = llt.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite solution of linear system".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Pattern;

    fn two_cell() -> Arc<SimplicialMesh> {
        Arc::new(SimplicialMesh::structured_rect(1, 1, [0.0, 1.0, 0.0, 1.0], Pattern::Diagonal).unwrap())
    }

    fn unit(n: usize) -> Arc<SimplicialMesh> {
        Arc::new(SimplicialMesh::structured_rect(n, n, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross).unwrap())
    }

    #[test]
    fn gradients_of_linear_functions() {
        let m = unit(3);
        let f = FeFunction::interpolate(&m, |x| 2.0 * x[0] - 3.0 * x[1] + 1.0);
        for c in 0..m.num_cells() {
            let g = f.gradient(c);
            assert!((g[0] - 2.0).abs() < 1e-13 && (g[1] + 3.0).abs() < 1e-13);
        }
        assert!((f.eval([0.3, 0.4]).unwrap() - (0.6 - 1.2 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn two_cell_stiffness_by_hand() {
        // vertices (0,0),(1,0),(0,1),(1,1); cells [0,1,3],[0,3,2].
        // P1 stiffness of the unit square split along the diagonal, full space:
        // K = [[1,-1/2,-1/2,0],[-1/2,1,0,-1/2],[-1/2,0,1,-1/2],[0,-1/2,-1/2,1]]
        let m = two_cell();
        let k_hand = [
            [1.0, -0.5, -0.5, 0.0],
            [-0.5, 1.0, 0.0, -0.5],
            [-0.5, 0.0, 1.0, -0.5],
            [0.0, -0.5, -0.5, 1.0],
        ];
        let phi = NFunction::power(2.0).unwrap();
        let d = Discretization::new(m.clone(), phi, Weight::one(), &RhsFunctional::zero(), 6);
        let c = [0.3, -1.2, 0.7, 2.0];
        let u = FeFunction::from_values(&m, c.to_vec()).unwrap();
        let flux = d.flux_vector(&u);
        for i in 0..4 {
            let kc: f64 = (0..4).map(|j| k_hand[i][j] * c[j]).sum();
            assert!((flux[i] - kc).abs() < 1e-14);
        }
        let e = gradient_modular(&d.phi, &d.quad, &u);
        let quad_form: f64 = (0..4).map(|i| (0..4).map(|j| c[i] * k_hand[i][j] * c[j]).sum::<f64>()).sum();
        assert!((e - 0.5 * quad_form).abs() < 1e-14);
    }

    #[test]
    fn newton_matrix_is_stiffness_for_quadratic() {
        let m = unit(3);
        let phi = NFunction::power(2.0).unwrap();
        let d = Discretization::new(m.clone(), phi, Weight::one(), &RhsFunctional::zero(), 6);
        let u = FeFunction::interpolate(&m, |x| x[0] * x[1]).constrained();
        let k0 = d.newton_matrix(&FeFunction::zeros(&m), 1e-10);
        let k1 = d.newton_matrix(&u, 1e-10);
        assert_eq!(k0.values, k1.values);
        let x = d.dofs.restrict(&u);
        let r = d.residual(&u);
        let kx = k0.matvec(&x);
        for (a, b) in r.iter().zip(&kx) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn modular_and_luxemburg_basics() {
        let m = unit(4);
        let q = WeightedQuadrature::new(&m, &Weight::one(), 6);
        let phi = NFunction::power(2.0).unwrap();
        let c = 3.0;
        let f = FeFunction::interpolate(&m, |_| c);
        let s = ModularSamples::values(&q, &f);
        assert!((s.modular(&phi) - c * c / 2.0).abs() < 1e-13);
        let z = FeFunction::zeros(&m);
        assert_eq!(ModularSamples::values(&q, &z).luxemburg(&phi).unwrap(), 0.0);
        // Φ_p closed form: ‖g‖ = p^{-1/p} (∫|g|^p)^{1/p}
        let g = FeFunction::interpolate(&m, |x| x[0] - 2.0 * x[1] * x[1]);
        for p in [1.5, 3.0] {
            let phi = NFunction::power(p).unwrap();
            let s = ModularSamples::values(&q, &g);
            let lp: f64 = s.0.iter().map(|(w, v)| w * v.powf(p)).sum();
            let exact = p.powf(-1.0 / p) * lp.powf(1.0 / p);
            let lux = s.luxemburg(&phi).unwrap();
            assert!((lux - exact).abs() < 1e-12 * exact);
            let s2 = ModularSamples::values(&q, &g.scaled(-2.5));
            assert!((s2.luxemburg(&phi).unwrap() - 2.5 * lux).abs() < 1e-11 * lux);
        }
    }

    #[test]
    fn linear_solve_of_poisson_stiffness() {
        let m = unit(4);
        let phi = NFunction::power(2.0).unwrap();
        let d = Discretization::new(m.clone(), phi, Weight::one(), &RhsFunctional::analytic(|_| 1.0), 6);
        let k = d.newton_matrix(&FeFunction::zeros(&m), 1e-10);
        assert!(k.asymmetry() <= 1e-15 * k.max_abs());
        let b: Vec<f64> = d.dofs.vertex_of_dof.iter().map(|&v| d.load[v]).collect();
        let x = k.solve_spd(&b).unwrap();
        let kx = k.matvec(&x);
        for (a, b) in kx.iter().zip(&b) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn fe_function_text_round_trip() {
        let m = unit(2);
        let f = FeFunction::interpolate(&m, |x| (x[0] * 7.1).sin() / 3.0).constrained();
        let t = f.to_text();
        let g = FeFunction::from_text(&t).unwrap();
        assert_eq!(g.values(), f.values());
        assert!(g.is_boundary_constrained());
        assert_eq!(g.to_text(), t);
    }

    #[test]
    fn prolongation_is_exact_for_p1() {
        let m = unit(2);
        let r = m.refine_uniform();
        let fine = Arc::new(r.mesh);
        let f = FeFunction::interpolate(&m, |x| 1.0 + x[0] - 0.5 * x[1]);
        let g = f.prolongate(&fine, &r.midpoint_parents);
        let h = FeFunction::interpolate(&fine, |x| 1.0 + x[0] - 0.5 * x[1]);
        for (a, b) in g.values().iter().zip(h.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
