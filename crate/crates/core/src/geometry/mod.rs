//! Discretization of the disk and its boundary data: the polar-ring mesh,
//! boundary parametrizations `Φ`, and the convex/non-convex split of the
//! target curve.

mod boundary;
mod hull;
mod mesh;
mod spline;

use thiserror::Error;

pub use boundary::{polygon_signed_area, validate_boundary_map, BoundaryMap, BoundaryValidation, MIN_VALIDATION_SAMPLES};
pub use hull::{
    classify_samples, convex_decompose, convex_hull, diameter, preimage_arcs, ConvexDecomposition, ThetaInterval,
    DEFAULT_HULL_REL_TOL, DEFAULT_HULL_SAMPLES,
};
pub use mesh::{DiskMesh, MIN_TRIANGLE_AREA};
pub use spline::PeriodicSpline;


use crate::expr::ParseError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("a disk mesh needs at least 8 boundary vertices, got {0}")]
    TooFewBoundaryVertices(usize),
    #[error("mesh grading must be positive, got {0}")]
    InvalidGrading(f64),
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    MeshDegenerate { triangle: usize, area: f64 },
    #[error("boundary validation needs at least 64 samples, got {0}")]
    TooFewSamples(usize),
    #[error("boundary curve crosses itself between theta = {theta_a} and theta = {theta_b}")]
    SelfIntersecting { theta_a: f64, theta_b: f64 },
    #[error("boundary curve is clockwise (signed area {signed_area})")]
    OrientationReversed { signed_area: f64 },
    #[error("boundary tangent vanishes at theta = {theta}")]
    DegenerateTangent { theta: f64 },
    #[error("boundary curve has non-finite samples")]
    NonFinite,
    #[error("bad boundary point list: {0}")]
    BadPointList(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}
