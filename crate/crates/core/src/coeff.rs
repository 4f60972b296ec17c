//! Coefficient fields `σ(x)` and their pointwise algebra: ellipticity,
//! the symmetric/skew split with the `div(A∇u) + b·∇u = 0` rewrite, and the
//! complex dilatations of the associated Beltrami equation.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expression, ParseError};
use crate::Point;

/// Sampling tolerance for the ellipticity inequalities.
pub const ELLIPTICITY_TOL: f64 = 1e-10;
/// Number of unit directions used by the ellipticity check.
pub const DEFAULT_DIRECTIONS: usize = 32;
/// Below this modulus `f_z` is treated as vanishing.
pub const VANISHING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoeffError {
    #[error("sigma is not invertible at ({x}, {y}): det = {det}")]
    NonInvertibleSigma { x: f64, y: f64, det: f64 },
    #[error("the Ab-form rewrite needs Lipschitz coefficients, field is tagged {0:?}")]
    InsufficientSmoothness(Smoothness),
    #[error("f_z vanishes (|f_z| = {modulus}); the second dilatation is undefined")]
    VanishingDerivative { modulus: f64 },
    #[error("dilatation modulus {modulus} is not below 1")]
    DegenerateDilatation { modulus: f64 },
    #[error("ellipticity constant K must be >= 1, got {0}")]
    InvalidConstant(f64),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    Hoelder,
    Lipschitz,
    Smooth,
}

impl Smoothness {
    pub fn is_lipschitz(self) -> bool {
        self >= Smoothness::Lipschitz
    }
}

/// A 2×2 coefficient matrix field on the closed unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaField {
    /// Entries in row-major order: σ₁₁, σ₁₂, σ₂₁, σ₂₂, each a function of `x, y`.
    entries: [Expression; 4],
    k: f64,
    smoothness: Smoothness,
}

const XY: &[&str] = &["x", "y"];

impl SigmaField {
    pub fn from_expressions(
        sources: [&str; 4],
        k: f64,
        smoothness: Smoothness,
    ) -> Result<Self, CoeffError> {
        if !(k >= 1.0) {
            return Err(CoeffError::InvalidConstant(k));
        }
        let mut parsed = Vec::with_capacity(4);
        for s in sources {
            parsed.push(Expression::parse(s, XY)?);
        }
        let entries: [Expression; 4] = parsed.try_into().expect("four entries");
        Ok(SigmaField { entries, k, smoothness })
    }

    pub fn constant(m: Matrix2<f64>, k: f64) -> Result<Self, CoeffError> {
        if !(k >= 1.0) {
            return Err(CoeffError::InvalidConstant(k));
        }
        let entries = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]].map(|v| Expression::constant(v, XY));
        Ok(SigmaField { entries, k, smoothness: Smoothness::Smooth })
    }

    pub fn identity() -> Self {
        Self::constant(Matrix2::identity(), 1.0).expect("K = 1 is valid")
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn entry_sources(&self) -> [&str; 4] {
        [0, 1, 2, 3].map(|i| self.entries[i].source())
    }

    /// `Some(σ)` when every entry is independent of position.
    pub fn as_constant(&self) -> Option<Matrix2<f64>> {
        let c: Vec<f64> = self.entries.iter().map(|e| e.as_constant()).collect::<Option<_>>()?;
        Some(Matrix2::new(c[0], c[1], c[2], c[3]))
    }

    pub fn at(&self, p: Point) -> Matrix2<f64> {
        let args = [p.x, p.y];
        Matrix2::new(
            self.entries[0].eval(&args),
            self.entries[1].eval(&args),
            self.entries[2].eval(&args),
            self.entries[3].eval(&args),
        )
    }
}

/// Evenly spaced unit directions on the half circle; `σξ·ξ` is even in ξ.
pub fn direction_grid(n: usize) -> Vec<Vector2<f64>> {
    (0..n)
        .map(|i| {
            let a = PI * i as f64 / n as f64;
            Vector2::new(a.cos(), a.sin())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityCertificate {
    /// min over points and directions of σξ·ξ
    pub min_form: f64,
    /// min over points and directions of σ⁻¹ξ·ξ
    pub min_inverse_form: f64,
    pub worst_point: [f64; 2],
    pub worst_inverse_point: [f64; 2],
    /// `1/K`
    pub threshold: f64,
    pub passes: bool,
}

pub fn check_ellipticity(
    sigma: &SigmaField,
    points: &[Point],
    directions: &[Vector2<f64>],
) -> Result<EllipticityCertificate, CoeffError> {
    assert!(!directions.is_empty(), "direction grid must be nonempty");
    let mut cert = EllipticityCertificate {
        min_form: f64::INFINITY,
        min_inverse_form: f64::INFINITY,
        worst_point: [f64::NAN; 2],
        worst_inverse_point: [f64::NAN; 2],
        threshold: 1.0 / sigma.k,
        passes: false,
    };
    for p in points {
        let m = sigma.at(*p);
        let det = m.determinant();
        if !(det > 0.0) {
            return Err(CoeffError::NonInvertibleSigma { x: p.x, y: p.y, det });
        }
        let inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det;
        for xi in directions {
            let q = xi.dot(&(m * xi));
            if q < cert.min_form {
                cert.min_form = q;
                cert.worst_point = [p.x, p.y];
            }
            let qi = xi.dot(&(inv * xi));
            if qi < cert.min_inverse_form {
                cert.min_inverse_form = qi;
                cert.worst_inverse_point = [p.x, p.y];
            }
        }
    }
    cert.passes = cert.min_form >= cert.threshold - ELLIPTICITY_TOL
        && cert.min_inverse_form >= cert.threshold - ELLIPTICITY_TOL;
    Ok(cert)
}

/// Pointwise data of the rewrite `div(σ∇u) = γ (div(A∇u) + b·∇u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbSample {
    pub sigma_hat: Matrix2<f64>,
    pub sigma_check: Matrix2<f64>,
    pub gamma: f64,
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
}

/// The Ab-form of a Lipschitz field, evaluated lazily at points.
#[derive(Debug, Clone, Copy)]
pub struct AbForm<'a> {
    sigma: &'a SigmaField,
    step: f64,
}

pub fn reduce_to_ab(sigma: &SigmaField, step: f64) -> Result<AbForm<'_>, CoeffError> {
    if !sigma.smoothness.is_lipschitz() {
        return Err(CoeffError::InsufficientSmoothness(sigma.smoothness));
    }
    assert!(step > 0.0, "finite-difference step must be positive");
    Ok(AbForm { sigma, step })
}

fn split(m: &Matrix2<f64>) -> (Matrix2<f64>, Matrix2<f64>) {
    let t = m.transpose();
    ((m + t) * 0.5, (m - t) * 0.5)
}

fn gamma_of(m: &Matrix2<f64>) -> f64 {
    split(m).0.determinant().sqrt()
}

impl AbForm<'_> {
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Partial derivative of `g` along axis `axis` at `p`: central differences
    /// when both stencil points stay in the closed disk, otherwise a
    /// second-order one-sided stencil pointing inward.
    fn partial(&self, g: impl Fn(Point) -> f64, p: Point, axis: usize) -> f64 {
        let h = self.step;
        let mut e = Vector2::zeros();
        e[axis] = 1.0;
        let fwd = p + e * h;
        let bwd = p - e * h;
        if fwd.norm() <= 1.0 && bwd.norm() <= 1.0 {
            return (g(fwd) - g(bwd)) / (2.0 * h);
        }
        let dir = if p[axis] > 0.0 { -1.0 } else { 1.0 };
        let d = e * (dir * h);
        dir * (-3.0 * g(p) + 4.0 * g(p + d) - g(p + d * 2.0)) / (2.0 * h)
    }

    pub fn at(&self, p: Point) -> AbSample {
        let m = self.sigma.at(p);
        let (sigma_hat, sigma_check) = split(&m);
        let gamma = sigma_hat.determinant().sqrt();
        let a = sigma_hat / gamma;
        let gam = |q: Point| gamma_of(&self.sigma.at(q));
        let skew = |q: Point| split(&self.sigma.at(q)).1[(0, 1)];
        let grad_gamma = Vector2::new(self.partial(gam, p, 0), self.partial(gam, p, 1));
        let ds_dx = self.partial(skew, p, 0);
        let ds_dy = self.partial(skew, p, 1);
        // b_j = γ⁻¹ (A_ij ∂_i γ + ∂_i σ̌_ij), with σ̌_21 = -σ̌_12
        let b = Vector2::new(
            (a[(0, 0)] * grad_gamma.x + a[(1, 0)] * grad_gamma.y - ds_dy) / gamma,
            (a[(0, 1)] * grad_gamma.x + a[(1, 1)] * grad_gamma.y + ds_dx) / gamma,
        );
        AbSample { sigma_hat, sigma_check, gamma, a, b }
    }
}

/// Complex dilatations `(μ, ν)` of the Beltrami equation satisfied by
/// `u + iv` when `∇v = Jσ∇u`.
pub fn dilatations(m: &Matrix2<f64>) -> (Complex64, Complex64) {
    let (s11, s12, s21, s22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let det = m.determinant();
    let denom = 1.0 + m.trace() + det;
    let mu = Complex64::new(s22 - s11, -(s12 + s21)) / denom;
    let nu = Complex64::new(1.0 - det, s12 - s21) / denom;
    (mu, nu)
}

pub fn beltrami_dilatations(sigma: &SigmaField, p: Point) -> (Complex64, Complex64) {
    dilatations(&sigma.at(p))
}

/// Sampled dilatations with the empirical bound `max |μ| + |ν|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiPair {
    pub mu: Vec<Complex64>,
    pub nu: Vec<Complex64>,
    pub k_bound: f64,
}

impl BeltramiPair {
    pub fn sample(sigma: &SigmaField, points: &[Point]) -> Self {
        let (mu, nu): (Vec<_>, Vec<_>) = points.iter().map(|p| beltrami_dilatations(sigma, *p)).unzip();
        let k_bound = mu.iter().zip(&nu).map(|(m, n)| m.norm() + n.norm()).fold(0.0, f64::max);
        BeltramiPair { mu, nu, k_bound }
    }
}

/// `μ̃ = μ + (conj f_z / f_z) ν`.
pub fn second_dilatation(mu: Complex64, nu: Complex64, f_z: Complex64) -> Result<Complex64, CoeffError> {
    let modulus = f_z.norm();
    if modulus < VANISHING_TOL {
        return Err(CoeffError::VanishingDerivative { modulus });
    }
    Ok(mu + f_z.conj() / f_z * nu)
}

/// The symmetric, unit-determinant coefficient matrix for which `log|χ|`
/// is a solution when `χ_z̄ = μ̃ χ_z`.
pub fn sigma_tilde(mu_tilde: Complex64) -> Result<Matrix2<f64>, CoeffError> {
    let r2 = mu_tilde.norm_sqr();
    if r2 >= 1.0 {
        return Err(CoeffError::DegenerateDilatation { modulus: r2.sqrt() });
    }
    let one = Complex64::new(1.0, 0.0);
    let d = 1.0 - r2;
    let off = -2.0 * mu_tilde.im / d;
    Ok(Matrix2::new((one - mu_tilde).norm_sqr() / d, off, off, (one + mu_tilde).norm_sqr() / d))
}
