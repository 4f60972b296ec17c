//! Stream function `v` with `∇v = Jσ∇u`, the complex map `f = u + iv`, and
//! the residual of the Beltrami equation it satisfies.

use std::collections::VecDeque;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use thiserror::Error;

use crate::coeff::{BeltramiPair, SigmaField};
use crate::geometry::DiskMesh;
use crate::solver::ScalarField;
use crate::Point;

/// Default closedness threshold relative to the field scale.
pub const LOOP_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConjugateError {
    #[error("flux form is not closed: loop residual {residual:e} exceeds {threshold:e}")]
    NonClosedForm { residual: f64, threshold: f64 },
}

/// Counterclockwise rotation by 90°.
pub fn rotate(w: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-w.y, w.x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFunction {
    pub vertex_values: Vec<f64>,
    pub base_vertex: usize,
    /// Worst mismatch over the non-tree links of the integration graph.
    pub loop_residual: f64,
    /// `2 max |σ∇u|`, the scale `loop_residual` is judged against.
    pub field_scale: f64,
    /// Values at edge midpoints, indexed like `mesh.edges`.
    pub edge_values: Vec<f64>,
    /// Per-triangle gradient of the piecewise linear `v`.
    pub gradients: Vec<Vector2<f64>>,
}

impl StreamFunction {
    /// Wraps arbitrary vertex values as a conforming P1 field.
    pub fn from_vertex_values(mesh: &DiskMesh, vertex_values: Vec<f64>, base_vertex: usize) -> Self {
        let gradients = (0..mesh.triangles.len()).map(|t| mesh.gradient(t, &vertex_values)).collect();
        let edge_values = mesh.edges.iter().map(|[a, b]| 0.5 * (vertex_values[*a] + vertex_values[*b])).collect();
        StreamFunction { vertex_values, base_vertex, loop_residual: 0.0, field_scale: 0.0, edge_values, gradients }
    }

    pub fn relative_loop_residual(&self) -> f64 {
        if self.field_scale > 0.0 {
            self.loop_residual / self.field_scale
        } else {
            self.loop_residual
        }
    }
}

fn midpoint(mesh: &DiskMesh, e: usize) -> Point {
    let [a, b] = mesh.edges[e];
    0.5 * (mesh.vertices[a] + mesh.vertices[b])
}

/// Integrates `Jσ∇u` into `v`.
///
/// The integration graph has one node per mesh edge (its midpoint) and links
/// the three edge midpoints of every triangle, where the flux is constant.
/// Walking a breadth-first tree of that graph makes `v` exact inside each
/// triangle; the loops left over close around interior vertices precisely
/// when `u` satisfies the discrete equation there, so the residual on
/// non-tree links measures how far `u` is from a discrete solution. Vertex
/// values average the per-triangle linear reconstructions.
pub fn stream_function(
    sigma: &SigmaField,
    u: &ScalarField,
    mesh: &DiskMesh,
    base: usize,
) -> Result<StreamFunction, ConjugateError> {
    stream_function_with_tol(sigma, u, mesh, base, LOOP_RESIDUAL_TOL)
}

pub fn stream_function_with_tol(
    sigma: &SigmaField,
    u: &ScalarField,
    mesh: &DiskMesh,
    base: usize,
    rel_tol: f64,
) -> Result<StreamFunction, ConjugateError> {
    let n_tri = mesh.triangles.len();
    let flux: Vec<Vector2<f64>> = (0..n_tri).map(|t| rotate(sigma.at(mesh.barycenter(t)) * u.gradients[t])).collect();
    let n_edges = mesh.edges.len();
    let mids: Vec<Point> = (0..n_edges).map(|e| midpoint(mesh, e)).collect();

    let mut value = vec![f64::NAN; n_edges];
    let mut tri_done = vec![false; n_tri];
    let mut queue = VecDeque::new();
    // fixed root so the tree does not depend on the base vertex
    let root = mesh.triangle_edges[mesh.boundary_edge_triangle[0]]
        .into_iter()
        .find(|&e| {
            let [a, b] = mesh.edges[e];
            mesh.is_boundary(a) && mesh.is_boundary(b)
        })
        .expect("boundary triangle has a boundary edge");
    value[root] = 0.0;
    queue.push_back(root);
    let mut residual: f64 = 0.0;
    while let Some(e) = queue.pop_front() {
        for &t in &mesh.edge_triangles[e] {
            if tri_done[t] {
                continue;
            }
            tri_done[t] = true;
            for f in mesh.triangle_edges[t] {
                if f == e {
                    continue;
                }
                let predicted = value[e] + flux[t].dot(&(mids[f] - mids[e]));
                if value[f].is_nan() {
                    value[f] = predicted;
                    queue.push_back(f);
                } else {
                    residual = residual.max((value[f] - predicted).abs());
                }
            }
        }
    }

    let mut sum = vec![0.0; mesh.vertex_count()];
    for (v, tris) in mesh.vertex_triangles.iter().enumerate() {
        let p = mesh.vertices[v];
        for &t in tris {
            let es = mesh.triangle_edges[t];
            let local: f64 = es.iter().map(|&e| value[e] + flux[t].dot(&(p - mids[e]))).sum::<f64>() / 3.0;
            sum[v] += local;
        }
        sum[v] /= tris.len() as f64;
    }
    let shift = sum[base];
    let vertex_values: Vec<f64> = sum.iter().map(|x| x - shift).collect();
    let edge_values: Vec<f64> = value.iter().map(|x| x - shift).collect();

    let scale = 2.0 * flux.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let sf = StreamFunction { vertex_values, base_vertex: base, loop_residual: residual, field_scale: scale, edge_values, gradients: flux };
    let threshold = rel_tol * scale.max(f64::MIN_POSITIVE);
    if residual > threshold {
        return Err(ConjugateError::NonClosedForm { residual, threshold });
    }
    Ok(sf)
}

/// `∂_z` of a real field from its gradient.
pub fn dz_real(g: Vector2<f64>) -> Complex64 {
    Complex64::new(g.x, -g.y) * 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMap {
    /// `u + iv` per vertex.
    pub f: Vec<Complex64>,
    pub f_z: Vec<Complex64>,
    pub f_zbar: Vec<Complex64>,
}

impl ComplexMap {
    /// `f` at the boundary vertices in loop order.
    pub fn boundary_trace(&self, mesh: &DiskMesh) -> Vec<Complex64> {
        mesh.boundary_loop.iter().map(|&v| self.f[v]).collect()
    }

    /// Real Jacobian of `f` on a triangle.
    pub fn jacobian(&self, t: usize) -> Matrix2<f64> {
        let (a, b) = (self.f_z[t], self.f_zbar[t]);
        let s = a + b;
        let d = a - b;
        // f_x = f_z + f_zbar, f_y = i(f_z − f_zbar)
        Matrix2::new(s.re, -d.im, s.im, d.re)
    }
}

pub fn complex_map(u: &ScalarField, v: &StreamFunction, mesh: &DiskMesh) -> ComplexMap {
    let f = u.vertex_values.iter().zip(&v.vertex_values).map(|(a, b)| Complex64::new(*a, *b)).collect();
    let (f_z, f_zbar) = (0..mesh.triangles.len())
        .map(|t| {
            let (gu, gv) = (u.gradients[t], v.gradients[t]);
            let fz = Complex64::new(gu.x + gv.y, gv.x - gu.y) * 0.5;
            let fzb = Complex64::new(gu.x - gv.y, gv.x + gu.y) * 0.5;
            (fz, fzb)
        })
        .unzip();
    ComplexMap { f, f_z, f_zbar }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiResidual {
    pub per_triangle: Vec<f64>,
    pub max: f64,
}

impl BeltramiResidual {
    /// Largest residual on triangles at least `skip` bands away from `∂B`.
    pub fn max_inside(&self, mesh: &DiskMesh, skip: usize) -> f64 {
        self.per_triangle
            .iter()
            .enumerate()
            .filter(|(t, _)| mesh.triangle_band(*t) + skip <= mesh.rings)
            .map(|(_, r)| *r)
            .fold(0.0, f64::max)
    }
}

/// `|f_z̄ − μ f_z − ν conj(f_z)|` per triangle; `pair` sampled at barycenters.
pub fn beltrami_residual(fmap: &ComplexMap, pair: &BeltramiPair, mesh: &DiskMesh) -> BeltramiResidual {
    assert_eq!(pair.mu.len(), mesh.triangles.len());
    let per_triangle: Vec<f64> = (0..mesh.triangles.len())
        .map(|t| {
            let fz = fmap.f_z[t];
            (fmap.f_zbar[t] - pair.mu[t] * fz - pair.nu[t] * fz.conj()).norm()
        })
        .collect();
    let max = per_triangle.iter().copied().fold(0.0, f64::max);
    BeltramiResidual { per_triangle, max }
}

/// Samples `σ`'s dilatations at every triangle barycenter.
pub fn barycentric_pair(sigma: &SigmaField, mesh: &DiskMesh) -> BeltramiPair {
    let pts: Vec<Point> = (0..mesh.triangles.len()).map(|t| mesh.barycenter(t)).collect();
    BeltramiPair::sample(sigma, &pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Smoothness;
    use crate::solver::{solve_dirichlet, SolveStats};
    use approx::assert_relative_eq;

    fn field(mesh: &DiskMesh, f: impl Fn(Point) -> f64) -> ScalarField {
        let vals = mesh.vertices.iter().map(|p| f(*p)).collect();
        ScalarField::from_vertex_values(mesh, vals, SolveStats::default())
    }

    fn base(mesh: &DiskMesh) -> usize {
        mesh.boundary_loop[0]
    }

    #[test]
    fn conjugate_of_linear_functions() {
        let mesh = DiskMesh::build(40, 1.0).unwrap();
        let u = field(&mesh, |p| p.x);
        let v = stream_function(&SigmaField::identity(), &u, &mesh, base(&mesh)).unwrap();
        for (p, val) in mesh.vertices.iter().zip(&v.vertex_values) {
            assert_relative_eq!(*val, p.y, epsilon = 1e-13);
        }
        let two = SigmaField::constant(Matrix2::identity() * 2.0, 2.0).unwrap();
        let v = stream_function(&two, &u, &mesh, base(&mesh)).unwrap();
        for (p, val) in mesh.vertices.iter().zip(&v.vertex_values) {
            assert_relative_eq!(*val, 2.0 * p.y, epsilon = 1e-13);
        }
        assert!(v.loop_residual < 1e-13);
    }

    #[test]
    fn conjugate_of_discrete_z_squared() {
        let mesh = DiskMesh::build(128, 1.0).unwrap();
        let u = solve_dirichlet(&SigmaField::identity(), &mesh, |t| (2.0 * t).cos()).unwrap();
        let v = stream_function(&SigmaField::identity(), &u, &mesh, base(&mesh)).unwrap();
        // base vertex (1, 0) has 2xy = 0
        let err = mesh
            .vertices
            .iter()
            .zip(&v.vertex_values)
            .map(|(p, val)| (val - 2.0 * p.x * p.y).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "error {err}");
        assert!(v.relative_loop_residual() < 1e-9);
    }

    #[test]
    fn non_solution_is_rejected() {
        let mesh = DiskMesh::build(64, 1.0).unwrap();
        let u = field(&mesh, |p| p.x * p.x);
        let err = stream_function(&SigmaField::identity(), &u, &mesh, base(&mesh)).unwrap_err();
        assert!(matches!(err, ConjugateError::NonClosedForm { .. }));
    }

    #[test]
    fn base_vertex_only_shifts_by_a_constant() {
        let mesh = DiskMesh::build(64, 1.0).unwrap();
        let s = SigmaField::from_expressions(["1 + x^2/2", "0.2*y", "-0.1*y", "1 + x^2/2"], 3.0, Smoothness::Smooth).unwrap();
        let u = solve_dirichlet(&s, &mesh, |t| (3.0 * t).sin()).unwrap();
        let a = stream_function(&s, &u, &mesh, base(&mesh)).unwrap();
        let b = stream_function(&s, &u, &mesh, 5).unwrap();
        let c = a.vertex_values[5];
        for (x, y) in a.vertex_values.iter().zip(&b.vertex_values) {
            assert!((x - y - c).abs() < 1e-12);
        }
    }

    #[test]
    fn wirtinger_derivatives_of_z_and_conj_z() {
        let mesh = DiskMesh::build(24, 1.0).unwrap();
        let u = field(&mesh, |p| p.x);
        let v = StreamFunction::from_vertex_values(&mesh, mesh.vertices.iter().map(|p| p.y).collect(), 0);
        let f = complex_map(&u, &v, &mesh);
        for t in 0..mesh.triangles.len() {
            assert!((f.f_z[t] - 1.0).norm() < 1e-12 && f.f_zbar[t].norm() < 1e-12);
            assert_relative_eq!(f.jacobian(t).determinant(), 1.0, epsilon = 1e-12);
        }
        let v = StreamFunction::from_vertex_values(&mesh, mesh.vertices.iter().map(|p| -p.y).collect(), 0);
        let f = complex_map(&u, &v, &mesh);
        for t in 0..mesh.triangles.len() {
            assert!(f.f_z[t].norm() < 1e-12 && (f.f_zbar[t] - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn beltrami_relation_holds_for_solved_maps() {
        let mesh = DiskMesh::build(96, 1.0).unwrap();
        for s in [
            SigmaField::identity(),
            SigmaField::constant(Matrix2::identity() * 2.0, 2.0).unwrap(),
            SigmaField::from_expressions(["2 + x", "0.4*y", "-0.3", "1 + y^2"], 4.0, Smoothness::Smooth).unwrap(),
        ] {
            let u = solve_dirichlet(&s, &mesh, |t| t.cos() + 0.3 * (2.0 * t).sin()).unwrap();
            let v = stream_function(&s, &u, &mesh, base(&mesh)).unwrap();
            let f = complex_map(&u, &v, &mesh);
            let pair = barycentric_pair(&s, &mesh);
            let r = beltrami_residual(&f, &pair, &mesh);
            let fz_max = f.f_z.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(r.max <= 1e-10 * fz_max, "residual {}", r.max);
            // sense preserving with dilatation bounded by k
            for t in 0..mesh.triangles.len() {
                assert!(f.f_zbar[t].norm() <= (pair.k_bound + 1e-9) * f.f_z[t].norm());
            }
        }
    }

    #[test]
    fn unrelated_field_has_large_residual() {
        let mesh = DiskMesh::build(48, 1.0).unwrap();
        let s = SigmaField::constant(Matrix2::identity() * 2.0, 2.0).unwrap();
        let u = solve_dirichlet(&s, &mesh, |t| t.cos()).unwrap();
        let v = StreamFunction::from_vertex_values(&mesh, mesh.vertices.iter().map(|p| p.x * p.y).collect(), 0);
        let f = complex_map(&u, &v, &mesh);
        let r = beltrami_residual(&f, &barycentric_pair(&s, &mesh), &mesh);
        assert!(r.max > 0.1);
    }
}
