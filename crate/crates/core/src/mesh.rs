//! Conforming triangulations of planar polygons and the local structures
//! built on them: element patches, vertex stars, inscribed balls.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Per-cell geometry of a P1 element.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub area: f64,
    /// Gradients of the three barycentric coordinates.
    pub grads: [[f64; 2]; 3],
}

/// A conforming triangulation with positively oriented cells.
#[derive(Clone, Debug)]
pub struct SimplicialMesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    boundary_faces: Vec<[usize; 2]>,
    on_boundary: Vec<bool>,
    vertex_cells: Vec<Vec<usize>>,
    geometry: Vec<CellGeometry>,
    edge_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Each rectangle split into four triangles through its centroid.
    CrissCross,
    /// Each rectangle split into two triangles along the SW–NE diagonal.
    Diagonal,
}

/// Per-cell shape data. `rho` is the diameter of the inscribed circle.
#[derive(Clone, Debug)]
pub struct ShapeMetrics {
    pub h_t: Vec<f64>,
    pub rho_t: Vec<f64>,
    pub sigma_t: Vec<f64>,
    pub h: f64,
    pub sigma: f64,
}

/// The star of an interior vertex and the largest ball centred at the vertex
/// that fits inside it.
#[derive(Clone, Debug)]
pub struct VertexStar {
    pub vertex: usize,
    pub cells: Vec<usize>,
    pub center: Point,
    pub radius: f64,
}

/// A refined mesh together with the parent edge of every new vertex.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: SimplicialMesh,
    /// `midpoint_parents[k]` holds the edge whose midpoint is vertex `n_old + k`.
    pub midpoint_parents: Vec<[usize; 2]>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Distance from `x` to the segment `[a, b]`.
pub fn point_segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(x, [a[0] + s * d[0], a[1] + s * d[1]])
}

impl SimplicialMesh {
    /// Builds and validates a mesh from explicit boundary faces.
    pub fn new(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        boundary_faces: Vec<[usize; 2]>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if cells.is_empty() {
            return Err(Error::Mesh("no cells".into()));
        }
        for (k, c) in cells.iter().enumerate() {
            if c.iter().any(|&v| v >= nv) {
                return Err(Error::Mesh(format!("cell {k} references a missing vertex")));
            }
        }
        for (k, f) in boundary_faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) || f[0] == f[1] {
                return Err(Error::Mesh(format!("boundary face {k} is invalid")));
            }
        }
        let mut geometry = Vec::with_capacity(cells.len());
        for (k, c) in cells.iter().enumerate() {
            let [a, b, d] = c.map(|v| vertices[v]);
            let area = signed_area(a, b, d);
            if !(area > 0.0) {
                return Err(Error::Mesh(format!(
                    "cell {k} is degenerate or negatively oriented (area {area})"
                )));
            }
            let p = [a, b, d];
            let mut grads = [[0.0; 2]; 3];
            for i in 0..3 {
                let (q, r) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                // gradient of λ_i is the inward normal of the opposite edge over its height
                grads[i] = [(q[1] - r[1]) / (2.0 * area), (r[0] - q[0]) / (2.0 * area)];
            }
            geometry.push(CellGeometry { area, grads });
        }

        let mut edge_cells: HashMap<(usize, usize), u32> = HashMap::new();
        for c in &cells {
            for i in 0..3 {
                *edge_cells.entry(edge_key(c[i], c[(i + 1) % 3])).or_default() += 1;
            }
        }
        let mut faces: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &boundary_faces {
            *faces.entry(edge_key(f[0], f[1])).or_default() += 1;
        }
        for (e, &n) in &edge_cells {
            let nb = faces.get(e).copied().unwrap_or(0);
            match (n, nb) {
                (2, 0) | (1, 1) => {}
                _ => {
                    return Err(Error::Mesh(format!(
                        "edge {e:?} is shared by {n} cells and listed {nb} times as boundary"
                    )))
                }
            }
        }
        for e in faces.keys() {
            if !edge_cells.contains_key(e) {
                return Err(Error::Mesh(format!("boundary face {e:?} is not a cell edge")));
            }
        }
        let mut on_boundary = vec![false; nv];
        let mut bdeg = vec![0usize; nv];
        for f in &boundary_faces {
            for &v in f {
                on_boundary[v] = true;
                bdeg[v] += 1;
            }
        }
        if bdeg.iter().any(|&d| d % 2 == 1) {
            return Err(Error::Mesh("boundary faces do not form closed loops".into()));
        }
        let mut vertex_cells = vec![Vec::new(); nv];
        for (k, c) in cells.iter().enumerate() {
            for &v in c {
                vertex_cells[v].push(k);
            }
        }
        if let Some(v) = vertex_cells.iter().position(|s| s.is_empty()) {
            return Err(Error::Mesh(format!("vertex {v} belongs to no cell")));
        }
        Ok(Self {
            edge_count: edge_cells.len(),
            vertices,
            cells,
            boundary_faces,
            on_boundary,
            vertex_cells,
            geometry,
        })
    }

    /// Builds a mesh whose boundary faces are the edges used by exactly one
    /// cell, oriented as in that cell.
    pub fn from_cells(vertices: Vec<Point>, cells: Vec<[usize; 3]>) -> Result<Self> {
        let mut count: HashMap<(usize, usize), u32> = HashMap::new();
        for c in &cells {
            for i in 0..3 {
                *count.entry(edge_key(c[i], c[(i + 1) % 3])).or_default() += 1;
            }
        }
        let mut faces = Vec::new();
        for c in &cells {
            for i in 0..3 {
                let (a, b) = (c[i], c[(i + 1) % 3]);
                if count[&edge_key(a, b)] == 1 {
                    faces.push([a, b]);
                }
            }
        }
        Self::new(vertices, cells, faces)
    }

    /// Structured triangulation of the rectangle `[x0, x1] × [y0, y1]` with
    /// `nx × ny` subrectangles.
    pub fn structured_rect(
        nx: usize,
        ny: usize,
        bbox: [f64; 4],
        pattern: Pattern,
    ) -> Result<Self> {
        let [x0, x1, y0, y1] = bbox;
        if nx == 0 || ny == 0 {
            return Err(Error::Mesh("cell counts must be positive".into()));
        }
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::Mesh(format!("degenerate box {bbox:?}")));
        }
        let gx = |i: usize| x0 + (x1 - x0) * i as f64 / nx as f64;
        let gy = |j: usize| y0 + (y1 - y0) * j as f64 / ny as f64;
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([gx(i), gy(j)]);
            }
        }
        let mut cells = Vec::new();
        let ngrid = vertices.len();
        for j in 0..ny {
            for i in 0..nx {
                let a = id(i, j);
                let b = id(i + 1, j);
                let c = id(i + 1, j + 1);
                let d = id(i, j + 1);
                match pattern {
                    Pattern::Diagonal => {
                        cells.push([a, b, c]);
                        cells.push([a, c, d]);
                    }
                    Pattern::CrissCross => {
                        let m = ngrid + j * nx + i;
                        cells.push([a, b, m]);
                        cells.push([b, c, m]);
                        cells.push([c, d, m]);
                        cells.push([d, a, m]);
                    }
                }
            }
        }
        if pattern == Pattern::CrissCross {
            for j in 0..ny {
                for i in 0..nx {
                    vertices.push([0.5 * (gx(i) + gx(i + 1)), 0.5 * (gy(j) + gy(j + 1))]);
                }
            }
        }
        let mut faces = Vec::new();
        for i in 0..nx {
            faces.push([id(i, 0), id(i + 1, 0)]);
        }
        for j in 0..ny {
            faces.push([id(nx, j), id(nx, j + 1)]);
        }
        for i in (0..nx).rev() {
            faces.push([id(i + 1, ny), id(i, ny)]);
        }
        for j in (0..ny).rev() {
            faces.push([id(0, j + 1), id(0, j)]);
        }
        Self::new(vertices, cells, faces)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_faces(&self) -> &[[usize; 2]] {
        &self.boundary_faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.on_boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| !self.on_boundary[v]).collect()
    }

    /// Cells containing vertex `v`, in increasing index order.
    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        self.cells[cell].map(|v| self.vertices[v])
    }

    pub fn cell_centroid(&self, cell: usize) -> Point {
        let p = self.cell_points(cell);
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    }

    /// Maps barycentric coordinates on `cell` to a physical point.
    pub fn map_point(&self, cell: usize, bary: &[f64; 3]) -> Point {
        let p = self.cell_points(cell);
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    /// Barycentric coordinates of `x` with respect to `cell`.
    pub fn barycentric(&self, cell: usize, x: Point) -> [f64; 3] {
        let p = self.cell_points(cell);
        let area = self.geometry[cell].area;
        [
            signed_area(x, p[1], p[2]) / area,
            signed_area(p[0], x, p[2]) / area,
            signed_area(p[0], p[1], x) / area,
        ]
    }

    /// First cell (lowest index) containing `x`, with a small tolerance.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        (0..self.num_cells()).find_map(|c| {
            let b = self.barycentric(c, x);
            b.iter().all(|&l| l >= -1e-12).then_some((c, b))
        })
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    pub fn bounding_box(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for v in &self.vertices {
            b[0] = b[0].min(v[0]);
            b[1] = b[1].max(v[0]);
            b[2] = b[2].min(v[1]);
            b[3] = b[3].max(v[1]);
        }
        b
    }

    /// `V − E + F` counting cells as faces (1 for a simply connected domain).
    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_cells() as i64
    }

    pub fn shape_metrics(&self) -> ShapeMetrics {
        let mut h_t = Vec::with_capacity(self.num_cells());
        let mut rho_t = Vec::with_capacity(self.num_cells());
        for c in 0..self.num_cells() {
            let [a, b, d] = self.cell_points(c);
            let (la, lb, lc) = (dist(b, d), dist(a, d), dist(a, b));
            h_t.push(la.max(lb).max(lc));
            let inradius = 2.0 * self.geometry[c].area / (la + lb + lc);
            rho_t.push(2.0 * inradius);
        }
        let sigma_t: Vec<f64> = h_t.iter().zip(&rho_t).map(|(h, r)| h / r).collect();
        ShapeMetrics {
            h: h_t.iter().cloned().fold(0.0, f64::max),
            sigma: sigma_t.iter().cloned().fold(0.0, f64::max),
            h_t,
            rho_t,
            sigma_t,
        }
    }

    /// Mesh size `max_T diam(T)`.
    pub fn h(&self) -> f64 {
        self.shape_metrics().h
    }

    /// Cells sharing at least one vertex with `cell` (including `cell`), sorted.
    pub fn patch_of_element(&self, cell: usize) -> Vec<usize> {
        let mut s: Vec<usize> = self.cells[cell]
            .iter()
            .flat_map(|&v| self.vertex_cells[v].iter().copied())
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Star and inscribed ball of an interior vertex.
    pub fn inscribed_ball(&self, v: usize) -> Result<VertexStar> {
        if v >= self.num_vertices() {
            return Err(Error::Mesh(format!("vertex {v} out of range")));
        }
        if self.on_boundary[v] {
            return Err(Error::Mesh(format!("vertex {v} lies on the boundary")));
        }
        let x = self.vertices[v];
        let mut r = f64::INFINITY;
        for &c in &self.vertex_cells[v] {
            let cell = self.cells[c];
            let i = cell.iter().position(|&w| w == v).expect("star cell contains vertex");
            let a = self.vertices[cell[(i + 1) % 3]];
            let b = self.vertices[cell[(i + 2) % 3]];
            r = r.min(point_segment_distance(x, a, b));
        }
        Ok(VertexStar {
            vertex: v,
            cells: self.vertex_cells[v].clone(),
            center: x,
            radius: r,
        })
    }

    /// Number of boundary edges of each cell.
    pub fn boundary_edges_per_cell(&self) -> Vec<usize> {
        let faces: std::collections::HashSet<(usize, usize)> = self
            .boundary_faces
            .iter()
            .map(|f| edge_key(f[0], f[1]))
            .collect();
        self.cells
            .iter()
            .map(|c| {
                (0..3)
                    .filter(|&i| faces.contains(&edge_key(c[i], c[(i + 1) % 3])))
                    .count()
            })
            .collect()
    }

    /// True iff no cell has more than one edge on the boundary.
    pub fn boundary_condition_check(&self) -> bool {
        self.boundary_edges_per_cell().iter().all(|&n| n <= 1)
    }

    /// Red refinement: every triangle split into four congruent children.
    pub fn refine_uniform(&self) -> Refinement {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut parents = Vec::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *mid.entry(edge_key(a, b)).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                parents.push([a.min(b), a.max(b)]);
                nv + parents.len() - 1
            })
        };
        let mut cells = Vec::with_capacity(4 * self.num_cells());
        for &[a, b, c] in &self.cells {
            let mab = midpoint(a, b, &mut vertices);
            let mbc = midpoint(b, c, &mut vertices);
            let mca = midpoint(c, a, &mut vertices);
            cells.push([a, mab, mca]);
            cells.push([mab, b, mbc]);
            cells.push([mca, mbc, c]);
            cells.push([mab, mbc, mca]);
        }
        let mut faces = Vec::with_capacity(2 * self.boundary_faces.len());
        for &[a, b] in &self.boundary_faces {
            let m = midpoint(a, b, &mut vertices);
            faces.push([a, m]);
            faces.push([m, b]);
        }
        let mesh = SimplicialMesh::new(vertices, cells, faces)
            .expect("refinement of a valid mesh is valid");
        Refinement {
            mesh,
            midpoint_parents: parents,
        }
    }

    /// The mesh after `levels` uniform refinements.
    pub fn refined(&self, levels: usize) -> SimplicialMesh {
        let mut m = self.clone();
        for _ in 0..levels {
            m = m.refine_uniform().mesh;
        }
        m
    }

    /// Serializes as `d nv nc nbf`, coordinates, cells, boundary faces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "2 {} {} {}",
            self.num_vertices(),
            self.num_cells(),
            self.boundary_faces.len()
        )
        .unwrap();
        for v in &self.vertices {
            writeln!(s, "{:?} {:?}", v[0], v[1]).unwrap();
        }
        for c in &self.cells {
            writeln!(s, "{} {} {}", c[0], c[1], c[2]).unwrap();
        }
        for f in &self.boundary_faces {
            writeln!(s, "{} {}", f[0], f[1]).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        Self::read_lines(&mut lines)
    }

    /// Reads a mesh from a line iterator, leaving trailing lines unread.
    pub(crate) fn read_lines<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Self> {
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let h: Vec<usize> = parse_fields(header)?;
        if h.len() != 4 {
            return Err(Error::Parse(format!("bad header line '{header}'")));
        }
        if h[0] != 2 {
            return Err(Error::Parse(format!("only d = 2 is supported, got {}", h[0])));
        }
        let (nv, nc, nbf) = (h[1], h[2], h[3]);
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("unexpected end of file in {what}")))
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f: Vec<f64> = parse_fields(next("vertices")?)?;
            if f.len() != 2 {
                return Err(Error::Parse("vertex line needs 2 coordinates".into()));
            }
            vertices.push([f[0], f[1]]);
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let f: Vec<usize> = parse_fields(next("cells")?)?;
            if f.len() != 3 {
                return Err(Error::Parse("cell line needs 3 vertex ids".into()));
            }
            cells.push([f[0], f[1], f[2]]);
        }
        let mut faces = Vec::with_capacity(nbf);
        for _ in 0..nbf {
            let f: Vec<usize> = parse_fields(next("boundary faces")?)?;
            if f.len() != 2 {
                return Err(Error::Parse("boundary face line needs 2 vertex ids".into()));
            }
            faces.push([f[0], f[1]]);
        }
        Self::new(vertices, cells, faces)
    }
}

pub(crate) fn parse_fields<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Parse(format!("cannot parse '{s}' in line '{line}'")))
        })
        .collect()
}
