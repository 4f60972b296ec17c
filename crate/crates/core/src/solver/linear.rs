//! Sparse storage and the two linear solvers: a direct sparse LU (faer) and
//! ILU(0)-preconditioned BiCGSTAB for large meshes.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use super::SolverError;

/// Square or rectangular matrix in compressed sparse row form, columns
/// sorted within each row, no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, t)
    }

    /// Max-norm of `A - Aᵀ` (square matrices).
    pub fn symmetry_defect(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self, SolverError> {
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col_idx[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(SolverError::SingularSystem(format!("zero diagonal in row {i}")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                pos[lu.col_idx[k]] = k;
            }
            for k in start..end {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let pivot = lu.values[diag[j]];
                let factor = lu.values[k] / pivot;
                lu.values[k] = factor;
                for m in diag[j] + 1..lu.row_ptr[j + 1] {
                    let c = lu.col_idx[m];
                    if pos[c] != usize::MAX {
                        lu.values[pos[c]] -= factor * lu.values[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            if lu.values[diag[i]].abs() < 1e-300 {
                return Err(SolverError::SingularSystem(format!("zero pivot in row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let lu = &self.lu;
        let mut y = r.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.values[k] * y[lu.col_idx[k]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.values[k] * y[lu.col_idx[k]];
            }
            y[i] = s / lu.values[self.diag[i]];
        }
        y
    }
}

/// Which algorithm a [`LinearSolver`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    SparseLu,
    IluBicgstab,
}

enum Backend {
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Iterative(Ilu0),
}

/// A factorized (or preconditioned) square system ready for repeated solves.
pub struct LinearSolver {
    matrix: CsrMatrix,
    backend: Backend,
    pub max_iterations: usize,
}

/// Outcome statistics of one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

impl LinearSolver {
    pub fn new(matrix: CsrMatrix, kind: SolverKind) -> Result<Self, SolverError> {
        let backend = match kind {
            SolverKind::SparseLu => {
                // solves stay sequential so repeated runs are bitwise identical
                faer::set_global_parallelism(faer::Par::Seq);
                let mut t = Vec::with_capacity(matrix.nnz());
                for i in 0..matrix.nrows {
                    for (j, v) in matrix.row(i) {
                        t.push(Triplet::new(i, j, v));
                    }
                }
                let a = SparseColMat::<usize, f64>::try_new_from_triplets(matrix.nrows, matrix.ncols, &t)
                    .map_err(|e| SolverError::SingularSystem(format!("{e:?}")))?;
                Backend::Lu(a.sp_lu().map_err(|e| SolverError::SingularSystem(format!("{e:?}")))?)
            }
            SolverKind::IluBicgstab => Backend::Iterative(Ilu0::new(&matrix)?),
        };
        Ok(LinearSolver { matrix, backend, max_iterations: 20_000 })
    }

    pub fn kind(&self) -> SolverKind {
        match self.backend {
            Backend::Lu(_) => SolverKind::SparseLu,
            Backend::Iterative(_) => SolverKind::IluBicgstab,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
    }

    /// Solves `A x = b` to relative residual `tol`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats), SolverError> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok((vec![0.0; b.len()], SolveStats { iterations: 0, relative_residual: 0.0 }));
        }
        match &self.backend {
            Backend::Lu(lu) => {
                let lu_solve = |rhs: &[f64]| -> Vec<f64> {
                    let col = Col::<f64>::from_fn(rhs.len(), |i| rhs[i]);
                    let x = lu.solve(&col);
                    (0..rhs.len()).map(|i| x[i]).collect()
                };
                let mut x = lu_solve(b);
                let mut rel = norm(&self.residual(&x, b)) / bnorm;
                let mut steps = 0;
                // iterative refinement
                while rel > tol && steps < 3 {
                    let r = self.residual(&x, b);
                    let dx = lu_solve(&r);
                    for (xi, d) in x.iter_mut().zip(&dx) {
                        *xi += d;
                    }
                    rel = norm(&self.residual(&x, b)) / bnorm;
                    steps += 1;
                }
                if !(rel <= tol) {
                    return Err(SolverError::SolverDiverged { iterations: steps, relative_residual: rel });
                }
                Ok((x, SolveStats { iterations: steps, relative_residual: rel }))
            }
            Backend::Iterative(ilu) => self.bicgstab(ilu, b, bnorm, tol),
        }
    }

    /// Right-preconditioned BiCGSTAB.
    fn bicgstab(&self, ilu: &Ilu0, b: &[f64], bnorm: f64, tol: f64) -> Result<(Vec<f64>, SolveStats), SolverError> {
        let n = b.len();
        let a = &self.matrix;
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        for it in 1..=self.max_iterations {
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let p_hat = ilu.apply(&p);
            v = a.mul_vec(&p_hat);
            alpha = rho / dot(&r_hat, &v);
            let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
            if norm(&s) / bnorm <= tol {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                return self.finish(x, b, bnorm, tol, it);
            }
            let s_hat = ilu.apply(&s);
            let t = a.mul_vec(&s_hat);
            omega = dot(&t, &s) / dot(&t, &t);
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            if norm(&r) / bnorm <= tol {
                return self.finish(x, b, bnorm, tol, it);
            }
            if omega == 0.0 || !omega.is_finite() {
                break;
            }
        }
        let rel = norm(&self.residual(&x, b)) / bnorm;
        Err(SolverError::SolverDiverged { iterations: self.max_iterations, relative_residual: rel })
    }

    fn finish(&self, x: Vec<f64>, b: &[f64], bnorm: f64, tol: f64, it: usize) -> Result<(Vec<f64>, SolveStats), SolverError> {
        // the recurrence residual can drift from the true one
        let rel = norm(&self.residual(&x, b)) / bnorm;
        if rel <= tol * 10.0 {
            Ok((x, SolveStats { iterations: it, relative_residual: rel }))
        } else {
            Err(SolverError::SolverDiverged { iterations: it, relative_residual: rel })
        }
    }
}
