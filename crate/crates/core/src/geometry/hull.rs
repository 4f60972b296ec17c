use std::f64::consts::TAU;

use serde::Serialize;

use super::boundary::BoundaryMap;
use crate::Point;

/// Default number of curve samples for the hull decomposition.
pub const DEFAULT_HULL_SAMPLES: usize = 4096;
/// Default hull-membership tolerance, relative to the curve diameter.
pub const DEFAULT_HULL_REL_TOL: f64 = 1e-9;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a - o).perp(&(b - o))
}

/// Andrew's monotone chain. Returns indices into `points` of the hull
/// vertices in counterclockwise order; collinear points are dropped.
pub fn convex_hull(points: &[Point]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x).then(points[a].y.total_cmp(&points[b].y)));
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &i in &idx {
        while hull.len() >= 2 && cross(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= lower && cross(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0 {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}

/// Largest pairwise distance, computed over hull vertices.
pub fn diameter(points: &[Point]) -> f64 {
    let hull = convex_hull(points);
    let mut best: f64 = 0.0;
    for (k, &i) in hull.iter().enumerate() {
        for &j in &hull[k + 1..] {
            best = best.max((points[i] - points[j]).norm());
        }
    }
    best
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

/// An interval of boundary parameters. `end` may exceed `2π` when the
/// interval wraps through `θ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaInterval {
    pub start: f64,
    pub end: f64,
}

impl ThetaInterval {
    /// Open-interval membership, modulo 2π.
    pub fn contains_open(&self, theta: f64) -> bool {
        let t = theta.rem_euclid(TAU);
        (t > self.start && t < self.end) || (t + TAU > self.start && t + TAU < self.end)
    }

    /// Closed-interval membership, modulo 2π.
    pub fn contains_closed(&self, theta: f64) -> bool {
        let t = theta.rem_euclid(TAU);
        (t >= self.start && t <= self.end) || (t + TAU >= self.start && t + TAU <= self.end)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Split of the target curve into the part on the boundary of its convex
/// hull and the complementary open arcs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexDecomposition {
    /// Closed parameter intervals whose image lies on the hull boundary.
    pub gamma_c: Vec<ThetaInterval>,
    /// Open parameter intervals whose image lies strictly inside the hull.
    pub gamma_nc: Vec<ThetaInterval>,
    /// Hull polygon, counterclockwise.
    pub hull: Vec<[f64; 2]>,
    pub n_samples: usize,
    pub tolerance: f64,
}

impl ConvexDecomposition {
    pub fn is_convex(&self) -> bool {
        self.gamma_nc.is_empty()
    }

    pub fn in_nonconvex_part(&self, theta: f64) -> bool {
        self.gamma_nc.iter().any(|iv| iv.contains_open(theta))
    }
}

/// Classifies each parameter sample as on-hull or strictly interior.
/// `tol` is an absolute distance.
pub fn classify_samples(points: &[Point], tol: f64) -> (Vec<bool>, Vec<usize>) {
    let n = points.len();
    let hull = convex_hull(points);
    let mut is_vertex = vec![false; n];
    for &i in &hull {
        is_vertex[i] = true;
    }
    let mut on_hull = is_vertex.clone();
    // For a simple closed curve, hull vertices appear along the curve in hull
    // order, so each sample lies under the hull edge joining the hull vertices
    // that bracket it along the curve.
    let marks: Vec<usize> = (0..n).filter(|&i| is_vertex[i]).collect();
    if marks.len() >= 2 {
        for (k, &a) in marks.iter().enumerate() {
            let b = marks[(k + 1) % marks.len()];
            let mut i = (a + 1) % n;
            while i != b {
                on_hull[i] = segment_distance(points[a], points[b], points[i]) <= tol;
                i = (i + 1) % n;
            }
        }
    }
    (on_hull, hull)
}

/// Decomposes `Φ(∂B)` into convex and non-convex parts.
pub fn convex_decompose(phi: &BoundaryMap, n_samples: usize, rel_tol: f64) -> ConvexDecomposition {
    let thetas = BoundaryMap::sample_thetas(n_samples);
    let points = phi.samples(n_samples);
    let tol = rel_tol * diameter(&points);
    decompose_samples(&thetas, &points, tol)
}

pub(crate) fn decompose_samples(thetas: &[f64], points: &[Point], tol: f64) -> ConvexDecomposition {
    let n = points.len();
    let (on_hull, hull) = classify_samples(points, tol);
    let hull_pts = hull.iter().map(|&i| [points[i].x, points[i].y]).collect();
    let mut gamma_c = Vec::new();
    let mut gamma_nc = Vec::new();
    if on_hull.iter().all(|&b| b) {
        gamma_c.push(ThetaInterval { start: 0.0, end: TAU });
    } else {
        // start the walk at a hull sample so no run wraps past the origin of the walk
        let s = on_hull.iter().position(|&b| b).expect("hull has vertices");
        let theta_at = |k: usize| thetas[(s + k) % n] + if s + k >= n { TAU } else { 0.0 };
        let mut k = 0;
        while k < n {
            let flag = on_hull[(s + k) % n];
            let start = k;
            while k < n && on_hull[(s + k) % n] == flag {
                k += 1;
            }
            if flag {
                // the final hull run closes up with the starting sample
                let end = if k == n { theta_at(n) } else { theta_at(k - 1) };
                gamma_c.push(ThetaInterval { start: theta_at(start), end });
            } else {
                gamma_nc.push(ThetaInterval { start: theta_at(start - 1), end: theta_at(k) });
            }
        }
        for iv in gamma_c.iter_mut().chain(gamma_nc.iter_mut()) {
            if iv.start >= TAU {
                iv.start -= TAU;
                iv.end -= TAU;
            }
        }
    }
    ConvexDecomposition { gamma_c, gamma_nc, hull: hull_pts, n_samples: n, tolerance: tol }
}

/// Parameter intervals of `Φ⁻¹(γ_nc)` on the unit circle. Because `Φ` is
/// parametrized by θ these are the non-convex intervals themselves.
pub fn preimage_arcs(decomp: &ConvexDecomposition) -> Vec<ThetaInterval> {
    decomp.gamma_nc.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn covered_exactly_once(d: &ConvexDecomposition) {
        let total: f64 = d.gamma_c.iter().chain(&d.gamma_nc).map(|iv| iv.length()).sum();
        assert_relative_eq!(total, TAU, epsilon = 1e-9);
    }

    #[test]
    fn hull_of_square_with_interior_and_collinear_points() {
        let p = |x: f64, y: f64| Point::new(x, y);
        let pts = vec![p(0., 0.), p(1., 0.), p(0.5, 0.), p(1., 1.), p(0.5, 0.5), p(0., 1.)];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(!h.contains(&2) && !h.contains(&4));
        assert!(polygon_area(&h.iter().map(|&i| pts[i]).collect::<Vec<_>>()) > 0.0);
    }

    fn polygon_area(p: &[Point]) -> f64 {
        super::super::boundary::polygon_signed_area(p)
    }

    #[test]
    fn ellipse_and_circle_are_convex() {
        let ellipse = BoundaryMap::from_expressions("2*cos(theta)", "sin(theta)").unwrap();
        let d = convex_decompose(&ellipse, DEFAULT_HULL_SAMPLES, DEFAULT_HULL_REL_TOL);
        assert!(d.is_convex());
        assert_eq!(d.gamma_c, vec![ThetaInterval { start: 0.0, end: TAU }]);
        let d = convex_decompose(&BoundaryMap::circle(), DEFAULT_HULL_SAMPLES, DEFAULT_HULL_REL_TOL);
        assert!(d.is_convex());
        assert!(preimage_arcs(&d).is_empty());
    }

    #[test]
    fn three_lobed_curve_has_three_nonconvex_arcs() {
        let phi = BoundaryMap::from_expressions(
            "(1 + 0.8*cos(3*theta))*cos(theta)",
            "(1 + 0.8*cos(3*theta))*sin(theta)",
        )
        .unwrap();
        let d = convex_decompose(&phi, DEFAULT_HULL_SAMPLES, DEFAULT_HULL_REL_TOL);
        assert_eq!(d.gamma_nc.len(), 3);
        assert_eq!(preimage_arcs(&d).len(), 3);
        covered_exactly_once(&d);
        // troughs at θ = π/3, π, 5π/3
        for trough in [TAU / 6.0, TAU / 2.0, 5.0 * TAU / 6.0] {
            assert!(d.in_nonconvex_part(trough));
        }
        assert!(!d.in_nonconvex_part(0.0));
    }

    /// Circle with a dent pushed inside the chord between θ = 1.0 and θ = 1.4.
    fn chord_dent() -> BoundaryMap {
        BoundaryMap::from_fn(|t| {
            let tt = t.rem_euclid(TAU);
            let r = |s: f64| -> f64 {
                if (1.0..=1.4).contains(&s) {
                    let chord = 0.2f64.cos() / (s - 1.2).cos();
                    chord * (1.0 - 0.3 * (std::f64::consts::PI * (s - 1.0) / 0.4).sin().powi(2))
                } else {
                    1.0
                }
            };
            let h = 1e-6;
            let p = |s: f64| Point::new(r(s) * s.cos(), r(s) * s.sin());
            (p(tt), (p(tt + h) - p(tt - h)) / (2.0 * h))
        })
    }

    #[test]
    fn constructed_dent_is_one_arc() {
        let d = convex_decompose(&chord_dent(), DEFAULT_HULL_SAMPLES, DEFAULT_HULL_REL_TOL);
        let arcs = preimage_arcs(&d);
        assert_eq!(arcs.len(), 1);
        let spacing = TAU / DEFAULT_HULL_SAMPLES as f64;
        assert!((arcs[0].start - 1.0).abs() <= spacing, "{arcs:?}");
        assert!((arcs[0].end - 1.4).abs() <= spacing, "{arcs:?}");
        covered_exactly_once(&d);
    }

    #[test]
    fn arcs_wrapping_through_zero_are_merged() {
        let phi = BoundaryMap::from_expressions(
            "(1 - 0.3*exp(20*(cos(theta) - 1)))*cos(theta)",
            "(1 - 0.3*exp(20*(cos(theta) - 1)))*sin(theta)",
        )
        .unwrap();
        let d = convex_decompose(&phi, 2048, DEFAULT_HULL_REL_TOL);
        assert_eq!(d.gamma_nc.len(), 1);
        assert!(d.gamma_nc[0].end > TAU && d.gamma_nc[0].start < TAU);
        assert!(d.in_nonconvex_part(0.0));
        covered_exactly_once(&d);
    }

    proptest! {
        /// Enlarging the tolerance never removes samples from the convex part.
        #[test]
        fn hull_membership_is_monotone(depth in 0.05f64..0.6, center in 0.0f64..TAU, t1 in 1e-9f64..1e-3, f in 1.0f64..100.0) {
            let src = format!("(1 - {depth}*exp(6*(cos(theta - {center}) - 1)))");
            let phi = BoundaryMap::from_expressions(&format!("{src}*cos(theta)"), &format!("{src}*sin(theta)")).unwrap();
            let pts = phi.samples(512);
            let (small, _) = classify_samples(&pts, t1);
            let (large, _) = classify_samples(&pts, t1 * f);
            for (a, b) in small.iter().zip(&large) {
                prop_assert!(!a || *b);
            }
        }

        /// Any convex polygon sampled along its boundary has no non-convex part.
        #[test]
        fn convex_targets_have_empty_nonconvex_part(a in 0.3f64..3.0, b in 0.3f64..3.0, rot in 0.0f64..TAU, p in 2.0f64..6.0) {
            // superellipse |x/a|^p + |y/b|^p = 1 is convex for p >= 1
            let phi = BoundaryMap::from_fn(move |t| {
                let (c, s) = (t.cos(), t.sin());
                let e = 2.0 / p;
                let x = a * c.signum() * c.abs().powf(e);
                let y = b * s.signum() * s.abs().powf(e);
                let (cr, sr) = (rot.cos(), rot.sin());
                (Point::new(cr * x - sr * y, sr * x + cr * y), Vector2::zeros())
            });
            let d = convex_decompose(&phi, 1024, DEFAULT_HULL_REL_TOL);
            prop_assert!(d.is_convex(), "{:?}", d.gamma_nc);
        }
    }
}
