use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Vector2;
use serde::Serialize;

use super::spline::PeriodicSpline;
use super::GeometryError;
use crate::expr::{Dual, Expression};
use crate::Point;

/// Minimum number of samples accepted by [`validate_boundary_map`].
pub const MIN_VALIDATION_SAMPLES: usize = 64;

type CurveFn = dyn Fn(f64) -> (Point, Vector2<f64>) + Send + Sync;

#[derive(Clone)]
enum Source {
    Expressions { x: Expression, y: Expression },
    Spline { x: PeriodicSpline, y: PeriodicSpline, points: usize },
    Function(Arc<CurveFn>),
}

/// Dirichlet data `Φ(θ) = (φ¹(θ), φ²(θ))` on the unit circle.
#[derive(Clone)]
pub struct BoundaryMap {
    source: Source,
}

impl fmt::Debug for BoundaryMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Source::Expressions { x, y } => write!(f, "BoundaryMap({x}, {y})"),
            Source::Spline { points, .. } => write!(f, "BoundaryMap(spline through {points} points)"),
            Source::Function(_) => f.write_str("BoundaryMap(<fn>)"),
        }
    }
}

const THETA: &[&str] = &["theta"];

impl BoundaryMap {
    /// Both components as expressions in `theta`.
    pub fn from_expressions(x: &str, y: &str) -> Result<Self, GeometryError> {
        Ok(BoundaryMap {
            source: Source::Expressions { x: Expression::parse(x, THETA)?, y: Expression::parse(y, THETA)? },
        })
    }

    /// Periodic cubic interpolation through `(θ_i, x_i, y_i)`.
    pub fn from_points(theta: &[f64], x: &[f64], y: &[f64]) -> Result<Self, GeometryError> {
        Ok(BoundaryMap {
            source: Source::Spline {
                x: PeriodicSpline::new(theta.to_vec(), x.to_vec())?,
                y: PeriodicSpline::new(theta.to_vec(), y.to_vec())?,
                points: theta.len(),
            },
        })
    }

    /// Reads a `theta,x,y` CSV with a header row.
    pub fn from_csv(path: &Path) -> Result<Self, GeometryError> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| GeometryError::BadPointList(e.to_string()))?;
        let headers = reader.headers().map_err(|e| GeometryError::BadPointList(e.to_string()))?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["theta", "x", "y"] {
            return Err(GeometryError::BadPointList(format!("expected header `theta,x,y`, got `{}`", headers.as_slice())));
        }
        let (mut t, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| GeometryError::BadPointList(e.to_string()))?;
            let field = |i: usize| -> Result<f64, GeometryError> {
                record[i]
                    .trim()
                    .parse()
                    .map_err(|_| GeometryError::BadPointList(format!("row {}: bad number `{}`", line + 2, &record[i])))
            };
            t.push(field(0)?);
            x.push(field(1)?);
            y.push(field(2)?);
        }
        Self::from_points(&t, &x, &y)
    }

    /// A curve given by a closure returning `(Φ(θ), Φ′(θ))`.
    pub fn from_fn(f: impl Fn(f64) -> (Point, Vector2<f64>) + Send + Sync + 'static) -> Self {
        BoundaryMap { source: Source::Function(Arc::new(f)) }
    }

    pub fn circle() -> Self {
        Self::from_expressions("cos(theta)", "sin(theta)").expect("valid expressions")
    }

    /// Short description recorded in reports.
    pub fn describe(&self) -> String {
        match &self.source {
            Source::Expressions { x, y } => format!("({x}, {y})"),
            Source::Spline { points, .. } => format!("periodic cubic spline through {points} points"),
            Source::Function(_) => "closure".to_string(),
        }
    }

    pub fn interpolation(&self) -> &'static str {
        match self.source {
            Source::Expressions { .. } => "analytic",
            Source::Spline { .. } => "periodic-cubic",
            Source::Function(_) => "analytic",
        }
    }

    pub fn eval(&self, theta: f64) -> (Point, Vector2<f64>) {
        match &self.source {
            Source::Expressions { x, y } => {
                let dx = x.eval(&[Dual::variable(theta)]);
                let dy = y.eval(&[Dual::variable(theta)]);
                (Point::new(dx.value, dy.value), Vector2::new(dx.deriv, dy.deriv))
            }
            Source::Spline { x, y, .. } => {
                let (px, dx) = x.eval(theta);
                let (py, dy) = y.eval(theta);
                (Point::new(px, py), Vector2::new(dx, dy))
            }
            Source::Function(f) => f(theta),
        }
    }

    pub fn point(&self, theta: f64) -> Point {
        self.eval(theta).0
    }

    pub fn derivative(&self, theta: f64) -> Vector2<f64> {
        self.eval(theta).1
    }

    /// Uniform samples `θ_k = 2πk/n`.
    pub fn sample_thetas(n: usize) -> Vec<f64> {
        (0..n).map(|k| TAU * k as f64 / n as f64).collect()
    }

    pub fn samples(&self, n: usize) -> Vec<Point> {
        Self::sample_thetas(n).into_iter().map(|t| self.point(t)).collect()
    }
}

/// Shoelace signed area of a closed polyline.
pub fn polygon_signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    0.5 * (0..n).map(|i| points[i].perp(&points[(i + 1) % n])).sum::<f64>()
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).perp(&(c - a))
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
pub(crate) fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Finds a pair of non-adjacent crossing segments of a closed polyline.
pub(crate) fn find_self_intersection(points: &[Point]) -> Option<(usize, usize)> {
    let n = points.len();
    let seg = |i: usize| (points[i], points[(i + 1) % n]);
    let mut order: Vec<usize> = (0..n).collect();
    let min_x = |i: usize| seg(i).0.x.min(seg(i).1.x);
    order.sort_by(|&a, &b| min_x(a).total_cmp(&min_x(b)));
    for (k, &i) in order.iter().enumerate() {
        let (a, b) = seg(i);
        let max_x = a.x.max(b.x);
        for &j in &order[k + 1..] {
            if min_x(j) > max_x {
                break;
            }
            let adjacent = j == (i + 1) % n || i == (j + 1) % n;
            if adjacent {
                continue;
            }
            let (c, d) = seg(j);
            if segments_intersect(a, b, c, d) {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryValidation {
    pub n_samples: usize,
    pub signed_area: f64,
    pub min_speed: f64,
    pub diameter: f64,
    pub interpolation: &'static str,
}

/// Confirms that `Φ` traces a simple, positively oriented curve with
/// nonvanishing tangent.
pub fn validate_boundary_map(phi: &BoundaryMap, n_samples: usize) -> Result<BoundaryValidation, GeometryError> {
    if n_samples < MIN_VALIDATION_SAMPLES {
        return Err(GeometryError::TooFewSamples(n_samples));
    }
    let thetas = BoundaryMap::sample_thetas(n_samples);
    let evals: Vec<(Point, Vector2<f64>)> = thetas.iter().map(|&t| phi.eval(t)).collect();
    let points: Vec<Point> = evals.iter().map(|e| e.0).collect();
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if let Some((i, j)) = find_self_intersection(&points) {
        return Err(GeometryError::SelfIntersecting { theta_a: thetas[i], theta_b: thetas[j] });
    }
    let signed_area = polygon_signed_area(&points);
    if !(signed_area > 0.0) {
        return Err(GeometryError::OrientationReversed { signed_area });
    }
    let diameter = super::hull::diameter(&points);
    let (k, min_speed) = evals
        .iter()
        .enumerate()
        .map(|(k, e)| (k, e.1.norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    if !(min_speed > 1e-12 * diameter) {
        return Err(GeometryError::DegenerateTangent { theta: thetas[k] });
    }
    Ok(BoundaryValidation { n_samples, signed_area, min_speed, diameter, interpolation: phi.interpolation() })
}
