//! P1 finite elements for `div(σ∇u) = 0` in the disk with Dirichlet data,
//! gradient recovery, and the boundary Jacobian of the mapping `U = (u¹, u²)`.

mod linear;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;
use thiserror::Error;

pub use linear::{CsrMatrix, LinearSolver, SolveStats, SolverKind};

use crate::coeff::SigmaField;
use crate::geometry::{BoundaryMap, DiskMesh};

/// Relative residual required of every linear solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// From this many boundary vertices on, the iterative solver is used.
pub const ITERATIVE_THRESHOLD: usize = 1024;
/// Relative spread of incident-triangle gradients above which a boundary
/// vertex is flagged low-confidence.
pub const CONFIDENCE_SPREAD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("linear system is singular: {0}")]
    SingularSystem(String),
    #[error("linear solve did not converge after {iterations} iterations (relative residual {relative_residual:e})")]
    SolverDiverged { iterations: usize, relative_residual: f64 },
}

/// Interior stiffness matrix and its coupling to the boundary values.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    /// Rows and columns indexed by interior vertices.
    pub matrix: CsrMatrix,
    /// Rows indexed by interior vertices, columns by boundary-loop position.
    pub coupling: CsrMatrix,
}

impl DirichletSystem {
    /// Right-hand side `-C g` for boundary values `g`.
    pub fn load(&self, boundary_values: &[f64]) -> Vec<f64> {
        self.coupling.mul_vec(boundary_values).into_iter().map(|v| -v).collect()
    }
}

/// Assembles `∫ σ∇φ_j·∇φ_i` with σ sampled at triangle barycenters.
pub fn assemble(sigma: &SigmaField, mesh: &DiskMesh) -> DirichletSystem {
    let n_int = mesh.interior_count();
    let mut interior = Vec::with_capacity(9 * mesh.triangles.len());
    let mut coupling = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let s = sigma.at(mesh.barycenter(t));
        let g = mesh.basis_gradients(t);
        let area = mesh.area(t);
        for a in 0..3 {
            let i = tri[a];
            if i >= n_int {
                continue;
            }
            for b in 0..3 {
                let j = tri[b];
                let k = area * (s * g[b]).dot(&g[a]);
                if j < n_int {
                    interior.push((i, j, k));
                } else {
                    coupling.push((i, j - n_int, k));
                }
            }
        }
    }
    DirichletSystem {
        matrix: CsrMatrix::from_triplets(n_int, n_int, interior),
        coupling: CsrMatrix::from_triplets(n_int, mesh.n_boundary(), coupling),
    }
}

/// A discrete solution: vertex values, per-triangle gradients, boundary trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarField {
    pub vertex_values: Vec<f64>,
    #[serde(skip)]
    pub gradients: Vec<Vector2<f64>>,
    pub dirichlet_trace: Vec<f64>,
    pub stats: SolveStats,
}

impl ScalarField {
    pub fn from_vertex_values(mesh: &DiskMesh, vertex_values: Vec<f64>, stats: SolveStats) -> Self {
        let gradients = (0..mesh.triangles.len()).map(|t| mesh.gradient(t, &vertex_values)).collect();
        let dirichlet_trace = vertex_values[mesh.interior_count()..].to_vec();
        ScalarField { vertex_values, gradients, dirichlet_trace, stats }
    }

    /// `a·self + b·other` on the same mesh; the solution map is linear so
    /// this is the solution for the combined boundary data.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        ScalarField {
            vertex_values: self.vertex_values.iter().zip(&other.vertex_values).map(|(x, y)| a * x + b * y).collect(),
            gradients: self.gradients.iter().zip(&other.gradients).map(|(x, y)| x * a + y * b).collect(),
            dirichlet_trace: self.dirichlet_trace.iter().zip(&other.dirichlet_trace).map(|(x, y)| a * x + b * y).collect(),
            stats: SolveStats {
                iterations: self.stats.iterations.max(other.stats.iterations),
                relative_residual: self.stats.relative_residual.max(other.stats.relative_residual),
            },
        }
    }
}

/// Factorized Dirichlet problem on one mesh, reusable across boundary data.
pub struct DirichletSolver<'m> {
    mesh: &'m DiskMesh,
    system: DirichletSystem,
    solver: LinearSolver,
}

impl<'m> DirichletSolver<'m> {
    pub fn new(sigma: &SigmaField, mesh: &'m DiskMesh) -> Result<Self, SolverError> {
        let kind = if mesh.n_boundary() >= ITERATIVE_THRESHOLD { SolverKind::IluBicgstab } else { SolverKind::SparseLu };
        Self::with_kind(sigma, mesh, kind)
    }

    pub fn with_kind(sigma: &SigmaField, mesh: &'m DiskMesh, kind: SolverKind) -> Result<Self, SolverError> {
        let system = assemble(sigma, mesh);
        let solver = LinearSolver::new(system.matrix.clone(), kind)?;
        Ok(DirichletSolver { mesh, system, solver })
    }

    pub fn kind(&self) -> SolverKind {
        self.solver.kind()
    }

    pub fn system(&self) -> &DirichletSystem {
        &self.system
    }

    /// Solves with boundary values given per boundary-loop vertex.
    pub fn solve_values(&self, boundary_values: &[f64]) -> Result<ScalarField, SolverError> {
        assert_eq!(boundary_values.len(), self.mesh.n_boundary());
        let load = self.system.load(boundary_values);
        let (interior, stats) = self.solver.solve(&load, RESIDUAL_TOL)?;
        let mut values = interior;
        values.extend_from_slice(boundary_values);
        Ok(ScalarField::from_vertex_values(self.mesh, values, stats))
    }

    /// Solves with boundary data `g(θ)`.
    pub fn solve(&self, g: impl Fn(f64) -> f64) -> Result<ScalarField, SolverError> {
        let values: Vec<f64> = self.mesh.boundary_theta.iter().map(|&t| g(t)).collect();
        self.solve_values(&values)
    }
}

pub fn solve_dirichlet(sigma: &SigmaField, mesh: &DiskMesh, g: impl Fn(f64) -> f64) -> Result<ScalarField, SolverError> {
    DirichletSolver::new(sigma, mesh)?.solve(g)
}

/// `det DU` and the full gradients at each boundary vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryJacobian {
    pub theta: Vec<f64>,
    pub det: Vec<f64>,
    /// `true` where incident-triangle gradients disagree by more than
    /// [`CONFIDENCE_SPREAD`].
    pub low_confidence: Vec<bool>,
    pub grad_u1: Vec<Vector2<f64>>,
    pub grad_u2: Vec<Vector2<f64>>,
}

impl BoundaryJacobian {
    pub fn min_det(&self) -> f64 {
        self.det.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn median_abs_det(&self) -> f64 {
        let mut v: Vec<f64> = self.det.iter().map(|d| d.abs()).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            0.0
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

/// The solved mapping `U = (u¹, u²)`.
#[derive(Debug, Clone)]
pub struct DiscreteMapping {
    pub u1: ScalarField,
    pub u2: ScalarField,
    /// Per-triangle `det DU`.
    pub jacobians: Vec<f64>,
    pub boundary: BoundaryJacobian,
    pub solver: SolverKind,
}

impl DiscreteMapping {
    /// Per-triangle Jacobian matrix with rows `∇u¹`, `∇u²`.
    pub fn jacobian_matrix(&self, t: usize) -> Matrix2<f64> {
        let a = self.u1.gradients[t];
        let b = self.u2.gradients[t];
        Matrix2::new(a.x, a.y, b.x, b.y)
    }

    pub fn image(&self, v: usize) -> crate::Point {
        crate::Point::new(self.u1.vertex_values[v], self.u2.vertex_values[v])
    }
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Reconstructs `DU` at each boundary vertex from the exact tangential
/// derivative `Φ′(θ)` and the normal derivative of the area-weighted mean of
/// incident-triangle gradients, and returns its determinant.
pub fn boundary_jacobian(u1: &ScalarField, u2: &ScalarField, mesh: &DiskMesh, phi: &BoundaryMap) -> BoundaryJacobian {
    let n = mesh.n_boundary();
    let mut out = BoundaryJacobian {
        theta: mesh.boundary_theta.clone(),
        det: Vec::with_capacity(n),
        low_confidence: Vec::with_capacity(n),
        grad_u1: Vec::with_capacity(n),
        grad_u2: Vec::with_capacity(n),
    };
    for (k, &v) in mesh.boundary_loop.iter().enumerate() {
        let theta = mesh.boundary_theta[k];
        let normal = Vector2::new(theta.cos(), theta.sin());
        let tangent = Vector2::new(-theta.sin(), theta.cos());
        let tangential = phi.derivative(theta);
        let tris = &mesh.vertex_triangles[v];
        let weight: f64 = tris.iter().map(|&t| mesh.area(t)).sum();
        let mean = |f: &ScalarField| tris.iter().map(|&t| f.gradients[t] * mesh.area(t)).sum::<Vector2<f64>>() / weight;
        let (m1, m2) = (mean(u1), mean(u2));
        let spread = |f: &ScalarField, m: Vector2<f64>| {
            tris.iter().map(|&t| (f.gradients[t] - m).norm()).fold(0.0, f64::max) / m.norm()
        };
        let low = !(spread(u1, m1) <= CONFIDENCE_SPREAD && spread(u2, m2) <= CONFIDENCE_SPREAD);
        let dn = Vector2::new(m1.dot(&normal), m2.dot(&normal));
        // columns of DU in the (normal, tangent) frame
        let g1 = normal * dn.x + tangent * tangential.x;
        let g2 = normal * dn.y + tangent * tangential.y;
        out.det.push(cross(dn, tangential));
        out.low_confidence.push(low);
        out.grad_u1.push(g1);
        out.grad_u2.push(g2);
    }
    out
}

/// Solves both components on the same factorization.
pub fn solve_mapping(sigma: &SigmaField, mesh: &DiskMesh, phi: &BoundaryMap) -> Result<DiscreteMapping, SolverError> {
    let solver = DirichletSolver::new(sigma, mesh)?;
    solve_mapping_with(&solver, mesh, phi)
}

pub fn solve_mapping_with(solver: &DirichletSolver<'_>, mesh: &DiskMesh, phi: &BoundaryMap) -> Result<DiscreteMapping, SolverError> {
    let data: Vec<crate::Point> = mesh.boundary_theta.iter().map(|&t| phi.point(t)).collect();
    let u1 = solver.solve_values(&data.iter().map(|p| p.x).collect::<Vec<_>>())?;
    let u2 = solver.solve_values(&data.iter().map(|p| p.y).collect::<Vec<_>>())?;
    let jacobians = u1.gradients.iter().zip(&u2.gradients).map(|(a, b)| cross(*a, *b)).collect();
    let boundary = boundary_jacobian(&u1, &u2, mesh, phi);
    Ok(DiscreteMapping { u1, u2, jacobians, boundary, solver: solver.kind() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::Smoothness;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn sup_error(mesh: &DiskMesh, u: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
        mesh.vertices
            .iter()
            .zip(&u.vertex_values)
            .map(|(p, v)| (v - exact(p.x, p.y)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplace_matrix_is_symmetric_with_positive_diagonal() {
        let mesh = DiskMesh::build(32, 1.0).unwrap();
        let sys = assemble(&SigmaField::identity(), &mesh);
        assert!(sys.matrix.symmetry_defect() < 1e-14);
        for i in 0..sys.matrix.nrows {
            assert!(sys.matrix.get(i, i) > 0.0);
        }
        // positive definite: x^T A x > 0 for a few probes
        for s in 1..5 {
            let x: Vec<f64> = (0..sys.matrix.nrows).map(|i| ((i * s) as f64 * 0.37).sin()).collect();
            let ax = sys.matrix.mul_vec(&x);
            assert!(x.iter().zip(&ax).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn variable_skew_sigma_gives_nonsymmetric_matrix() {
        let mesh = DiskMesh::build(32, 1.0).unwrap();
        // a constant skew part cancels across interior edges, a variable one does not
        let s = SigmaField::constant(Matrix2::new(1.0, 0.3, -0.3, 1.0), 2.0).unwrap();
        assert!(assemble(&s, &mesh).matrix.symmetry_defect() < 1e-12);
        let s = SigmaField::from_expressions(["1", "0.3*x", "-0.3*x", "1"], 2.0, Smoothness::Smooth).unwrap();
        assert!(assemble(&s, &mesh).matrix.symmetry_defect() > 1e-3);
    }

    #[test]
    fn scalar_sigma_scales_the_matrix() {
        let mesh = DiskMesh::build(24, 1.0).unwrap();
        let a = assemble(&SigmaField::identity(), &mesh);
        let b = assemble(&SigmaField::constant(Matrix2::identity() * 2.0, 2.0).unwrap(), &mesh);
        for (x, y) in a.matrix.values.iter().zip(&b.matrix.values) {
            assert_relative_eq!(2.0 * x, y, epsilon = 1e-13);
        }
    }

    #[test]
    fn linear_data_is_reproduced_exactly() {
        let mesh = DiskMesh::build(48, 1.0).unwrap();
        let u = solve_dirichlet(&SigmaField::identity(), &mesh, |t| t.cos()).unwrap();
        assert!(sup_error(&mesh, &u, |x, _| x) < 1e-12);
        let s = SigmaField::constant(Matrix2::new(2.0, 0.4, 0.4, 1.0), 4.0).unwrap();
        let u = solve_dirichlet(&s, &mesh, |t| 3.0 * t.cos() - t.sin() + 0.5).unwrap();
        assert!(sup_error(&mesh, &u, |x, y| 3.0 * x - y + 0.5) < 1e-12);
        for g in &u.gradients {
            assert_relative_eq!(g.x, 3.0, epsilon = 1e-10);
            assert_relative_eq!(g.y, -1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn constant_skew_part_drops_out() {
        let mesh = DiskMesh::build(64, 1.0).unwrap();
        let g = |t: f64| (2.0 * t).cos() + 0.3 * (3.0 * t).sin();
        let a = solve_dirichlet(&SigmaField::identity(), &mesh, g).unwrap();
        let s = SigmaField::constant(Matrix2::new(1.0, 0.3, -0.3, 1.0), 2.0).unwrap();
        let b = solve_dirichlet(&s, &mesh, g).unwrap();
        for (x, y) in a.vertex_values.iter().zip(&b.vertex_values) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn solution_is_linear_in_the_data() {
        let mesh = DiskMesh::build(40, 1.0).unwrap();
        let s = SigmaField::from_expressions(["1 + x^2/2", "0.2*y", "-0.2*y", "1 + x^2/2"], 3.0, Smoothness::Smooth).unwrap();
        let solver = DirichletSolver::new(&s, &mesh).unwrap();
        let g1 = |t: f64| (3.0 * t).sin();
        let g2 = |t: f64| t.cos().exp();
        let a = solver.solve(g1).unwrap();
        let b = solver.solve(g2).unwrap();
        let c = solver.solve(|t| 2.0 * g1(t) - 0.5 * g2(t)).unwrap();
        let comb = a.combine(2.0, &b, -0.5);
        for (x, y) in comb.vertex_values.iter().zip(&c.vertex_values) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn discrete_maximum_principle() {
        let mesh = DiskMesh::build(64, 1.0).unwrap();
        let s = SigmaField::from_expressions(["2 + sin(3*x)", "0.5*x", "-0.5*x", "1 + y^2"], 6.0, Smoothness::Smooth).unwrap();
        let u = solve_dirichlet(&s, &mesh, |t| (5.0 * t).sin() * t.cos()).unwrap();
        let lo = u.dirichlet_trace.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u.dirichlet_trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in &u.vertex_values {
            assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
        }
        assert!(u.stats.relative_residual <= RESIDUAL_TOL);
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        let err = |n: usize| {
            let mesh = DiskMesh::build(n, 1.0).unwrap();
            let u = solve_dirichlet(&SigmaField::identity(), &mesh, |t| (2.0 * t).cos()).unwrap();
            sup_error(&mesh, &u, |x, y| x * x - y * y)
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 / e2 >= 3.5, "errors {e1:e} {e2:e}, ratio {}", e1 / e2);
    }

    #[test]
    fn iterative_and_direct_solvers_agree() {
        let mesh = DiskMesh::build(96, 1.0).unwrap();
        let s = SigmaField::from_expressions(["1 + x^2/2", "0.3", "-0.3", "1 + x^2/2"], 3.0, Smoothness::Smooth).unwrap();
        let direct = DirichletSolver::with_kind(&s, &mesh, SolverKind::SparseLu).unwrap();
        let iter = DirichletSolver::with_kind(&s, &mesh, SolverKind::IluBicgstab).unwrap();
        let g = |t: f64| (2.0 * t).sin() + t.cos();
        let a = direct.solve(g).unwrap();
        let b = iter.solve(g).unwrap();
        assert!(b.stats.relative_residual <= 1e-9);
        for (x, y) in a.vertex_values.iter().zip(&b.vertex_values) {
            assert_relative_eq!(x, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn identity_and_ellipse_mappings() {
        let mesh = DiskMesh::build(64, 1.0).unwrap();
        let m = solve_mapping(&SigmaField::identity(), &mesh, &BoundaryMap::circle()).unwrap();
        for d in m.jacobians.iter().chain(&m.boundary.det) {
            assert_relative_eq!(*d, 1.0, epsilon = 1e-10);
        }
        assert!(m.boundary.low_confidence.iter().all(|l| !l));

        let ellipse = BoundaryMap::from_expressions("2*cos(theta)", "sin(theta)").unwrap();
        let m = solve_mapping(&SigmaField::identity(), &mesh, &ellipse).unwrap();
        for d in m.jacobians.iter().chain(&m.boundary.det) {
            assert_relative_eq!(*d, 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn anisotropic_boundary_profile_converges() {
        // fine mesh is the oracle for the boundary Jacobian profile
        let s = SigmaField::constant(Matrix2::new(1.0, 0.0, 0.0, 4.0), 4.0).unwrap();
        let phi = BoundaryMap::from_expressions("cos(theta) + 0.1*cos(2*theta)", "sin(theta) - 0.1*sin(2*theta)").unwrap();
        let profile = |n: usize| {
            let mesh = DiskMesh::build(n, 1.0).unwrap();
            solve_mapping(&s, &mesh, &phi).unwrap().boundary
        };
        let fine = profile(512);
        let coarse = profile(128);
        // boundary vertices of the coarse mesh are every 4th fine one
        let err: f64 = (0..128).map(|k| (coarse.det[k] - fine.det[4 * k]).abs()).fold(0.0, f64::max);
        assert!(err < 0.15, "max profile deviation {err}");
        assert!(fine.det.iter().all(|d| *d > 0.0));
        assert_relative_eq!(fine.theta[4], TAU * 4.0 / 512.0, epsilon = 1e-15);
    }
}
