use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector2;

use super::GeometryError;
use crate::Point;

/// Smallest admissible triangle area.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// Structured polar-ring triangulation of the closed unit disk.
///
/// Vertices are stored ring by ring from the center outward, so the boundary
/// vertices form the tail of `vertices` and every interior vertex index is
/// below [`DiskMesh::interior_count`].
#[derive(Debug, Clone)]
pub struct DiskMesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary vertex indices ordered counterclockwise starting at θ = 0.
    pub boundary_loop: Vec<usize>,
    /// Parameter angle of each entry of `boundary_loop`.
    pub boundary_theta: Vec<f64>,
    /// Maximum edge length.
    pub h: f64,
    /// Ring index of each vertex (0 = center, `rings` = boundary).
    pub vertex_ring: Vec<usize>,
    pub rings: usize,
    /// Unique undirected edges `[a, b]` with `a < b`.
    pub edges: Vec<[usize; 2]>,
    /// For each triangle, the edge opposite each local vertex.
    pub triangle_edges: Vec<[usize; 3]>,
    /// The one or two triangles incident to each edge.
    pub edge_triangles: Vec<Vec<usize>>,
    /// For boundary edge `i` (from `boundary_loop[i]` to the next), its triangle.
    pub boundary_edge_triangle: Vec<usize>,
    /// Triangles incident to each vertex.
    pub vertex_triangles: Vec<Vec<usize>>,
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b - a).perp(&(c - a)))
}

/// Merges two concentric rings into a strip of triangles.
fn stitch(inner: &[usize], outer: &[usize], angle: &[f64], triangles: &mut Vec<[usize; 3]>) {
    let m = inner.len();
    let n = outer.len();
    let two_pi = 2.0 * PI;
    let a0 = angle[inner[0]];
    // outer vertex nearest in angle to the first inner one
    let j0 = (0..n)
        .min_by(|&p, &q| {
            let dp = (angle[outer[p]] - a0).rem_euclid(two_pi).min((a0 - angle[outer[p]]).rem_euclid(two_pi));
            let dq = (angle[outer[q]] - a0).rem_euclid(two_pi).min((a0 - angle[outer[q]]).rem_euclid(two_pi));
            dp.total_cmp(&dq)
        })
        .expect("outer ring is nonempty");
    let ua = |i: usize| a0 + (angle[inner[i % m]] - a0).rem_euclid(two_pi) + two_pi * (i / m) as f64;
    let b0 = {
        let raw = angle[outer[j0]];
        let mut d = (raw - a0).rem_euclid(two_pi);
        if d > PI {
            d -= two_pi;
        }
        a0 + d
    };
    let ub = |j: usize| b0 + (angle[outer[(j0 + j) % n]] - b0).rem_euclid(two_pi) + two_pi * (j / n) as f64;
    let (mut i, mut j) = (0, 0);
    while i < m || j < n {
        let advance_inner = if i == m {
            false
        } else if j == n {
            true
        } else {
            ua(i + 1) < ub(j + 1)
        };
        if advance_inner {
            triangles.push([inner[i % m], inner[(i + 1) % m], outer[(j0 + j) % n]]);
            i += 1;
        } else {
            triangles.push([inner[i % m], outer[(j0 + j + 1) % n], outer[(j0 + j) % n]]);
            j += 1;
        }
    }
}

impl DiskMesh {
    /// Builds the mesh with `n_boundary` equally spaced boundary vertices.
    ///
    /// `grading` scales the number of rings: `rings = round(grading · n_boundary / 2π)`,
    /// so `grading = 1` yields nearly equilateral triangles. Interior ring `k`
    /// holds `round(n_boundary / rings) · k` vertices.
    pub fn build(n_boundary: usize, grading: f64) -> Result<Self, GeometryError> {
        if n_boundary < 8 {
            return Err(GeometryError::TooFewBoundaryVertices(n_boundary));
        }
        if !(grading > 0.0) {
            return Err(GeometryError::InvalidGrading(grading));
        }
        let rings = ((grading * n_boundary as f64 / (2.0 * PI)).round() as usize).max(2);
        let mut vertices = vec![Point::zeros()];
        let mut angle = vec![0.0];
        let mut vertex_ring = vec![0];
        let mut ring_members: Vec<Vec<usize>> = vec![vec![0]];
        // interior ring k holds step·k vertices, so the rings near the center
        // have the same shape at every resolution
        let step = ((n_boundary as f64 / rings as f64).round() as usize).max(1);
        for k in 1..=rings {
            let r = k as f64 / rings as f64;
            let count = if k == rings { n_boundary } else { (step * k).max(3) };
            // interior rings turn by half their spacing
            let offset = if k < rings { PI / count as f64 } else { 0.0 };
            let mut members = Vec::with_capacity(count);
            for i in 0..count {
                let t = offset + 2.0 * PI * i as f64 / count as f64;
                let p = if k == rings { Point::new(t.cos(), t.sin()) } else { Point::new(r * t.cos(), r * t.sin()) };
                members.push(vertices.len());
                vertices.push(p);
                angle.push(t);
                vertex_ring.push(k);
            }
            ring_members.push(members);
        }

        let mut triangles = Vec::new();
        let first = &ring_members[1];
        for i in 0..first.len() {
            triangles.push([0, first[i], first[(i + 1) % first.len()]]);
        }
        for k in 1..rings {
            stitch(&ring_members[k], &ring_members[k + 1], &angle, &mut triangles);
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area.abs() < MIN_TRIANGLE_AREA {
                return Err(GeometryError::MeshDegenerate { triangle: t, area });
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }

        let boundary_loop = ring_members[rings].clone();
        let boundary_theta = boundary_loop.iter().map(|&v| angle[v]).collect();
        let mut mesh = DiskMesh {
            vertices,
            triangles,
            boundary_loop,
            boundary_theta,
            h: 0.0,
            vertex_ring,
            rings,
            edges: Vec::new(),
            triangle_edges: Vec::new(),
            edge_triangles: Vec::new(),
            boundary_edge_triangle: Vec::new(),
            vertex_triangles: Vec::new(),
        };
        mesh.build_topology();
        Ok(mesh)
    }

    fn build_topology(&mut self) {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        self.vertex_triangles = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    self.edges.push([key.0, key.1]);
                    self.edge_triangles.push(Vec::new());
                    self.edges.len() - 1
                });
                self.edge_triangles[e].push(t);
                te[k] = e;
                self.vertex_triangles[tri[k]].push(t);
            }
            self.triangle_edges.push(te);
        }
        self.h = self
            .edges
            .iter()
            .map(|&[a, b]| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max);
        let n = self.boundary_loop.len();
        self.boundary_edge_triangle = (0..n)
            .map(|i| {
                let a = self.boundary_loop[i];
                let b = self.boundary_loop[(i + 1) % n];
                let e = index[&(a.min(b), a.max(b))];
                self.edge_triangles[e][0]
            })
            .collect();
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_loop.len()
    }

    /// Number of interior vertices; they occupy indices `0..interior_count()`.
    pub fn interior_count(&self) -> usize {
        self.vertices.len() - self.boundary_loop.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        v >= self.interior_count()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn barycenter(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        (self.vertices[a] + self.vertices[b] + self.vertices[c]) / 3.0
    }

    /// Gradients of the three P1 hat functions on triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> [Vector2<f64>; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let two_area = (b - a).perp(&(c - a));
        let rot = |e: Vector2<f64>| Vector2::new(-e.y, e.x) / two_area;
        // ∇λ_i is the inward normal of the opposite edge scaled by its length / 2|T|
        [rot(c - b), rot(a - c), rot(b - a)]
    }

    /// Gradient of the P1 interpolant of `values` on triangle `t`.
    pub fn gradient(&self, t: usize, values: &[f64]) -> Vector2<f64> {
        let g = self.basis_gradients(t);
        let tri = self.triangles[t];
        g[0] * values[tri[0]] + g[1] * values[tri[1]] + g[2] * values[tri[2]]
    }

    /// The radial band a triangle belongs to: ring index of its outermost vertex.
    pub fn triangle_band(&self, t: usize) -> usize {
        self.triangles[t].iter().map(|&v| self.vertex_ring[v]).max().unwrap_or(0)
    }

    pub fn min_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).fold(f64::INFINITY, f64::min)
    }
}
