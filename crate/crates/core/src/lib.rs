//! Numerical certification of global invertibility for planar mappings whose
//! components solve `div(σ∇u) = 0` in the unit disk with prescribed boundary
//! values.
//!
//! The pipeline solves both Dirichlet problems with P1 finite elements,
//! recovers the boundary Jacobian `det DU` on `∂B`, and corroborates the
//! verdict with argument-principle critical-point counts, winding numbers of
//! the boundary traces, an interior fold scan and a brute-force injectivity
//! oracle.

// guards such as `!(x > 0.0)` are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod coeff;
pub mod conjugate;
pub mod expr;
pub mod gallery;
pub mod geometry;
pub mod run;
pub mod scenario;
pub mod solver;
pub mod topology;

/// A point of the plane.
pub type Point = nalgebra::Vector2<f64>;
