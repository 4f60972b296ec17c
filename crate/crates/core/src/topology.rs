//! Winding numbers, argument-principle critical counts and the boundary
//! homotopy used to relate `WN(f(∂B))`, `M` and `WN(Φ(∂B))`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Vector2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coeff::SigmaField;
use crate::conjugate::{dz_real, ComplexMap, StreamFunction};
use crate::geometry::{BoundaryMap, DiskMesh};
use crate::solver::DiscreteMapping;

/// Samples smaller than this fraction of the largest one count as zero.
pub const VANISHING_REL_TOL: f64 = 1e-9;
/// Allowed distance of `total_turn / 2π` from an integer.
pub const ROUNDING_TOL: f64 = 0.05;
pub const DEFAULT_ALPHA_GRID: usize = 16;
pub const DEFAULT_T_GRID: usize = 21;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyError {
    #[error("derivative vanishes at sample {index} (|d| = {modulus:e})")]
    VanishingDerivative { index: usize, modulus: f64 },
    #[error("turn of {turn} rad between samples {index} and {index}+1; the loop is undersampled")]
    UnderSampled { index: usize, turn: f64 },
    #[error("winding {total_turn} / 2π is not close to an integer")]
    NonInteger { total_turn: f64 },
    #[error("∂z u_α vanishes on the boundary trace at θ = {theta} (|∂z u_α| = {modulus:e})")]
    BoundaryCritical { theta: f64, modulus: f64 },
    #[error("∇u¹ vanishes on the boundary at θ = {theta}")]
    VanishingGradient { theta: f64 },
    #[error("det DU is not positive on the boundary (min {min_det:e})")]
    NonPositiveBoundaryDet { min_det: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingNumberResult {
    pub value: i64,
    pub total_turn: f64,
    pub min_speed: f64,
}

fn as_complex(v: Vector2<f64>) -> Complex64 {
    Complex64::new(v.x, v.y)
}

/// Winding of a closed loop of nonzero plane vectors around the origin.
pub fn winding_number(samples: &[Vector2<f64>]) -> Result<WindingNumberResult, TopologyError> {
    let z: Vec<Complex64> = samples.iter().map(|v| as_complex(*v)).collect();
    complex_winding(&z)
}

pub fn complex_winding(z: &[Complex64]) -> Result<WindingNumberResult, TopologyError> {
    let scale = z.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let tol = VANISHING_REL_TOL * scale;
    let mut min_speed = f64::INFINITY;
    for (index, w) in z.iter().enumerate() {
        let modulus = w.norm();
        if !(modulus > tol) {
            return Err(TopologyError::VanishingDerivative { index, modulus });
        }
        min_speed = min_speed.min(modulus);
    }
    let n = z.len();
    let mut total_turn = 0.0;
    for i in 0..n {
        let turn = (z[(i + 1) % n] / z[i]).arg();
        if turn.abs() >= FRAC_PI_2 {
            return Err(TopologyError::UnderSampled { index: i, turn });
        }
        total_turn += turn;
    }
    let ratio = total_turn / TAU;
    let value = ratio.round();
    if (ratio - value).abs() >= ROUNDING_TOL {
        return Err(TopologyError::NonInteger { total_turn });
    }
    Ok(WindingNumberResult { value: value as i64, total_turn, min_speed })
}

/// Gradient of `u_α = cos α u¹ + sin α u²` on the triangles along `∂B`.
pub fn alpha_gradient_trace(mapping: &DiscreteMapping, mesh: &DiskMesh, alpha: f64) -> Vec<Vector2<f64>> {
    let (c, s) = (alpha.cos(), alpha.sin());
    mesh.boundary_edge_triangle.iter().map(|&t| mapping.u1.gradients[t] * c + mapping.u2.gradients[t] * s).collect()
}

/// `M_α` as the winding of `∂_z u_α` along the boundary trace.
pub fn critical_count(gradient_trace: &[Vector2<f64>], mesh: &DiskMesh) -> Result<WindingNumberResult, TopologyError> {
    let dz: Vec<Complex64> = gradient_trace.iter().map(|g| dz_real(*g)).collect();
    let scale = dz.iter().map(|w| w.norm()).fold(0.0, f64::max);
    for (k, w) in dz.iter().enumerate() {
        if !(w.norm() > VANISHING_REL_TOL * scale) {
            // boundary edge k spans θ_k..θ_{k+1}
            let n = mesh.n_boundary();
            let theta = 0.5 * (mesh.boundary_theta[k] + if k + 1 < n { mesh.boundary_theta[k + 1] } else { TAU });
            return Err(TopologyError::BoundaryCritical { theta, modulus: w.norm() });
        }
    }
    complex_winding(&dz)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSweep {
    pub alphas: Vec<f64>,
    /// `M_α`, or `None` where the count is undefined.
    pub counts: Vec<Option<i64>>,
    pub errors: Vec<Option<TopologyError>>,
    pub constant: bool,
    #[serde(rename = "M")]
    pub m: Option<i64>,
}

pub fn alpha_sweep(mapping: &DiscreteMapping, mesh: &DiskMesh, n_alpha: usize) -> AlphaSweep {
    let alphas: Vec<f64> = (0..n_alpha).map(|k| PI * k as f64 / n_alpha as f64).collect();
    let results: Vec<Result<i64, TopologyError>> = alphas
        .par_iter()
        .map(|&a| critical_count(&alpha_gradient_trace(mapping, mesh, a), mesh).map(|w| w.value))
        .collect();
    let counts: Vec<Option<i64>> = results.iter().map(|r| r.as_ref().ok().copied()).collect();
    let errors = results.into_iter().map(|r| r.err()).collect();
    let constant = !counts.is_empty() && counts.iter().all(|c| c.is_some() && *c == counts[0]);
    let m = if constant { counts[0] } else { None };
    AlphaSweep { alphas, counts, errors, constant, m }
}

/// Count from the unit field `ξ = J∇u¹/|∇u¹|` along `∂B`.
///
/// When `det DU > 0` on the boundary, `∇u_α` stays within a quarter turn of
/// `ξ`, so both wind the same way; the critical count is the winding of
/// `∂_z u_α = conj(∇u_α)/2`, hence the sign flip.
pub fn xi_field_count(mapping: &DiscreteMapping) -> Result<i64, TopologyError> {
    let b = &mapping.boundary;
    let min_det = b.min_det();
    if !(min_det > 0.0) {
        return Err(TopologyError::NonPositiveBoundaryDet { min_det });
    }
    let scale = b.grad_u1.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let mut xi = Vec::with_capacity(b.grad_u1.len());
    for (g, theta) in b.grad_u1.iter().zip(&b.theta) {
        let n = g.norm();
        if !(n > VANISHING_REL_TOL * scale) {
            return Err(TopologyError::VanishingGradient { theta: *theta });
        }
        xi.push(Vector2::new(-g.y, g.x) / n);
    }
    Ok(-winding_number(&xi)?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyRecord {
    pub t_grid: Vec<f64>,
    /// Minimum over boundary vertices for each `t`.
    pub min_per_t: Vec<f64>,
    pub min_boundary_det: f64,
    /// Smallest `det DU_0 / (K⁻¹|∇u¹|²)` over the boundary.
    pub ellipticity_margin: f64,
}

/// `det DU_t` for `U_t = (u¹, (1 − t)v¹ + t u²)` at the boundary vertices,
/// with `∇v¹` recovered like the normal derivative of `u`.
pub fn homotopy_check(
    mapping: &DiscreteMapping,
    v1: &StreamFunction,
    sigma: &SigmaField,
    mesh: &DiskMesh,
    n_t: usize,
) -> HomotopyRecord {
    let b = &mapping.boundary;
    let grad_v: Vec<Vector2<f64>> = mesh
        .boundary_loop
        .iter()
        .map(|&v| {
            let tris = &mesh.vertex_triangles[v];
            let w: f64 = tris.iter().map(|&t| mesh.area(t)).sum();
            tris.iter().map(|&t| v1.gradients[t] * mesh.area(t)).sum::<Vector2<f64>>() / w
        })
        .collect();
    let cross = |a: Vector2<f64>, c: Vector2<f64>| a.x * c.y - a.y * c.x;
    let t_grid: Vec<f64> = (0..n_t).map(|i| if n_t > 1 { i as f64 / (n_t - 1) as f64 } else { 1.0 }).collect();
    let min_per_t: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            (0..b.det.len())
                .map(|k| cross(b.grad_u1[k], grad_v[k] * (1.0 - t) + b.grad_u2[k] * t))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let ellipticity_margin = (0..b.det.len())
        .map(|k| {
            let g = b.grad_u1[k];
            cross(g, grad_v[k]) * sigma.k() / g.norm_squared()
        })
        .fold(f64::INFINITY, f64::min);
    let min_boundary_det = min_per_t.iter().copied().fold(f64::INFINITY, f64::min);
    HomotopyRecord { t_grid, min_per_t, min_boundary_det, ellipticity_margin }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MPlusOneReport {
    pub wn_f: i64,
    pub wn_phi: i64,
    #[serde(rename = "M")]
    pub m: Option<i64>,
    /// `WN(f(∂B)) = M + 1`.
    pub m_plus_one_holds: bool,
    /// `WN(Φ(∂B)) = 1`.
    pub wn_phi_is_one: bool,
}

/// Tangent windings of the boundary polygon of `f` and of the curve `Φ`.
pub fn verify_m_plus_one(
    fmap: &ComplexMap,
    sweep: &AlphaSweep,
    phi: &BoundaryMap,
    mesh: &DiskMesh,
) -> Result<MPlusOneReport, TopologyError> {
    let trace = fmap.boundary_trace(mesh);
    let n = trace.len();
    let edges: Vec<Complex64> = (0..n).map(|k| trace[(k + 1) % n] - trace[k]).collect();
    let wn_f = complex_winding(&edges)?.value;
    let samples = mesh.n_boundary().max(1024);
    let tangents: Vec<Vector2<f64>> = BoundaryMap::sample_thetas(samples).iter().map(|&t| phi.derivative(t)).collect();
    let wn_phi = winding_number(&tangents)?.value;
    Ok(MPlusOneReport {
        wn_f,
        wn_phi,
        m: sweep.m,
        m_plus_one_holds: sweep.m.is_some_and(|m| wn_f == m + 1),
        wn_phi_is_one: wn_phi == 1,
    })
}
