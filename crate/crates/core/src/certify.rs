//! Boundary-Jacobian certificates for the full boundary and for the
//! non-convex arcs only, with the corroborating evidence: α-sweep, winding
//! identities, homotopy, interior fold scan and an injectivity oracle.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::SigmaField;
use crate::conjugate::{barycentric_pair, beltrami_residual, complex_map, stream_function_with_tol, StreamFunction};
use crate::geometry::{convex_decompose, BoundaryMap, ConvexDecomposition, DiskMesh, ThetaInterval};
use crate::geometry::{DEFAULT_HULL_REL_TOL, DEFAULT_HULL_SAMPLES};
use crate::solver::{solve_mapping, DiscreteMapping, SolverKind};
use crate::topology::{alpha_sweep, homotopy_check, verify_m_plus_one, xi_field_count, AlphaSweep, HomotopyRecord, MPlusOneReport};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Diffeomorphism,
    BoundaryDegenerate,
    FoldDetected,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Diffeomorphism => 0,
            Verdict::BoundaryDegenerate => 10,
            Verdict::FoldDetected => 11,
            Verdict::Inconclusive => 12,
        }
    }
}

/// Which boundary vertices the positivity condition is checked on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCheck {
    /// Every boundary vertex.
    Main,
    /// Only vertices whose parameter lies in a non-convex arc.
    Nonconvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `det DU > det_rel · median |det DU|` is required on the checked set.
    pub det_rel: f64,
    /// Stream-function loop residual relative to the field scale.
    pub loop_residual: f64,
    /// Relative hull tolerance of the convex decomposition.
    pub hull_rel: f64,
    /// Vertex images closer than this fraction of the local image edge
    /// length count as a collision.
    pub collision_rel: f64,
    /// Preimages must be at least this many mesh sizes apart to collide.
    pub collision_separation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            det_rel: 1e-6,
            loop_residual: 1e-6,
            hull_rel: DEFAULT_HULL_REL_TOL,
            collision_rel: 0.1,
            collision_separation: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub tolerances: Tolerances,
    pub n_alpha: usize,
    pub n_t: usize,
    pub n_probe: usize,
    pub seed: u64,
    /// Run the α-sweep, winding identities, stream function and homotopy.
    pub topology: bool,
    /// Run the injectivity oracle.
    pub injectivity: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tolerances: Tolerances::default(),
            n_alpha: crate::topology::DEFAULT_ALPHA_GRID,
            n_t: crate::topology::DEFAULT_T_GRID,
            n_probe: 2000,
            seed: 0,
            topology: true,
            injectivity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldScan {
    pub folded_triangles: Vec<usize>,
    pub interior_min_det: f64,
    pub argmin_triangle: usize,
}

/// Exhaustive per-triangle sign scan of `det DU`.
pub fn interior_fold_scan(mapping: &DiscreteMapping) -> FoldScan {
    let folded_triangles = mapping.jacobians.iter().enumerate().filter(|(_, d)| !(**d > 0.0)).map(|(t, _)| t).collect();
    let (argmin_triangle, interior_min_det) = mapping
        .jacobians
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (t, d)| if d < acc.1 { (t, d) } else { acc });
    FoldScan { folded_triangles, interior_min_det, argmin_triangle }
}

/// Winding number of a closed polygon around `p` by signed crossings.
pub fn polygon_winding(poly: &[Point], p: Point) -> i64 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let side = (b - a).perp(&(p - a));
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            w -= 1;
        }
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeWitness {
    pub target: [f64; 2],
    /// Winding of `U(∂B)` around the target.
    pub winding: i64,
    /// Preimages of the target found in distinct places of the disk.
    pub preimages: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionPair {
    pub vertices: [usize; 2],
    pub preimage_distance: f64,
    pub image_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub n_probe: usize,
    /// Extra probes placed at images of orientation-reversing triangles.
    pub n_fold_probes: usize,
    pub probes_with_winding_one: usize,
    /// Probes whose preimage is not a single point.
    pub multi_sheet_probes: usize,
    /// Up to a few examples of probes with winding ≠ 1 or several preimages.
    pub probe_witnesses: Vec<ProbeWitness>,
    pub collision_count: usize,
    pub collision_examples: Vec<CollisionPair>,
}

impl InjectivityReport {
    pub fn has_witness(&self) -> bool {
        self.probes_with_winding_one < self.n_probe + self.n_fold_probes || self.multi_sheet_probes > 0 || self.collision_count > 0
    }
}

const MAX_EXAMPLES: usize = 8;

/// Uniform bucket grid over image triangles.
struct ImageIndex {
    origin: Point,
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl ImageIndex {
    fn key(&self, p: Point) -> (i64, i64) {
        (((p.x - self.origin.x) / self.cell).floor() as i64, ((p.y - self.origin.y) / self.cell).floor() as i64)
    }

    fn build(images: &[[Point; 3]], cell: f64) -> Self {
        let mut idx = ImageIndex { origin: Point::zeros(), cell, cells: HashMap::new() };
        for (t, tri) in images.iter().enumerate() {
            let lo = Point::new(tri.iter().map(|p| p.x).fold(f64::INFINITY, f64::min), tri.iter().map(|p| p.y).fold(f64::INFINITY, f64::min));
            let hi = Point::new(tri.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max), tri.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max));
            let (a, b) = (idx.key(lo), idx.key(hi));
            for i in a.0..=b.0 {
                for j in a.1..=b.1 {
                    idx.cells.entry((i, j)).or_default().push(t);
                }
            }
        }
        idx
    }

    fn candidates(&self, p: Point) -> &[usize] {
        self.cells.get(&self.key(p)).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Barycentric coordinates of `p` in triangle `tri`.
fn barycentric(tri: &[Point; 3], p: Point) -> Option<[f64; 3]> {
    let d = (tri[1] - tri[0]).perp(&(tri[2] - tri[0]));
    if d == 0.0 {
        return None;
    }
    let l1 = (p - tri[0]).perp(&(tri[2] - tri[0])) / d;
    let l2 = (tri[1] - tri[0]).perp(&(p - tri[0])) / d;
    Some([1.0 - l1 - l2, l1, l2])
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Brute-force injectivity evidence for the piecewise linear map.
///
/// Probes are drawn uniformly inside `Φ(∂B)` (plus one probe at the image
/// centroid of every orientation-reversing triangle). For each probe the
/// winding of `U(∂B)` around it and its preimages in the disk are computed;
/// preimages closer than one mesh size are merged. Separately, vertex
/// images are hashed to find distant vertices with nearly equal images.
pub fn injectivity_oracle(mapping: &DiscreteMapping, mesh: &DiskMesh, n_probe: usize, seed: u64, tol: &Tolerances) -> InjectivityReport {
    let images: Vec<Point> = (0..mesh.vertex_count()).map(|v| mapping.image(v)).collect();
    let tri_images: Vec<[Point; 3]> = mesh.triangles.iter().map(|t| t.map(|v| images[v])).collect();
    let boundary: Vec<Point> = mesh.boundary_loop.iter().map(|&v| images[v]).collect();
    let edge_len: Vec<f64> = mesh.edges.iter().map(|[a, b]| (images[*a] - images[*b]).norm()).collect();
    let median_edge = median(edge_len.clone()).max(f64::MIN_POSITIVE);
    let index = ImageIndex::build(&tri_images, 2.0 * median_edge);

    let mut probes = Vec::with_capacity(n_probe);
    let lo = Point::new(boundary.iter().map(|p| p.x).fold(f64::INFINITY, f64::min), boundary.iter().map(|p| p.y).fold(f64::INFINITY, f64::min));
    let hi = Point::new(boundary.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max), boundary.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while probes.len() < n_probe && attempts < 1000 * n_probe.max(1) {
        attempts += 1;
        let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if polygon_winding(&boundary, p) != 0 {
            probes.push(p);
        }
    }
    let n_random = probes.len();
    probes.extend(
        mapping
            .jacobians
            .iter()
            .enumerate()
            .filter(|(_, d)| **d < 0.0)
            .map(|(t, _)| (tri_images[t][0] + tri_images[t][1] + tri_images[t][2]) / 3.0),
    );

    let merge_radius = mesh.h;
    let outcomes: Vec<(i64, Vec<Point>)> = probes
        .par_iter()
        .map(|&p| {
            let winding = polygon_winding(&boundary, p);
            let mut pre: Vec<Point> = Vec::new();
            for &t in index.candidates(p) {
                let Some(l) = barycentric(&tri_images[t], p) else { continue };
                if l.iter().all(|&x| x >= -1e-12) {
                    let [a, b, c] = mesh.triangles[t].map(|v| mesh.vertices[v]);
                    let x = a * l[0] + b * l[1] + c * l[2];
                    if pre.iter().all(|q| (q - x).norm() > merge_radius) {
                        pre.push(x);
                    }
                }
            }
            (winding, pre)
        })
        .collect();
    let mut probes_with_winding_one = 0;
    let mut multi_sheet_probes = 0;
    let mut probe_witnesses = Vec::new();
    for (p, (winding, pre)) in probes.iter().zip(&outcomes) {
        if *winding == 1 {
            probes_with_winding_one += 1;
        }
        if pre.len() > 1 {
            multi_sheet_probes += 1;
        }
        if (*winding != 1 || pre.len() > 1) && probe_witnesses.len() < MAX_EXAMPLES {
            probe_witnesses.push(ProbeWitness { target: [p.x, p.y], winding: *winding, preimages: pre.iter().map(|q| [q.x, q.y]).collect() });
        }
    }

    // collision scan over vertex images
    let mut local = vec![f64::INFINITY; mesh.vertex_count()];
    for (e, [a, b]) in mesh.edges.iter().enumerate() {
        local[*a] = local[*a].min(edge_len[e]);
        local[*b] = local[*b].min(edge_len[e]);
    }
    let cell = tol.collision_rel * median_edge;
    let key = |p: Point| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (v, p) in images.iter().enumerate() {
        grid.entry(key(*p)).or_default().push(v);
    }
    let separation = tol.collision_separation * mesh.h;
    let mut collisions = Vec::new();
    let mut collision_count = 0;
    for (v, p) in images.iter().enumerate() {
        let (i, j) = key(*p);
        for di in -1..=1 {
            for dj in -1..=1 {
                let Some(list) = grid.get(&(i + di, j + dj)) else { continue };
                for &w in list {
                    if w <= v {
                        continue;
                    }
                    let image_distance = (images[w] - p).norm();
                    let preimage_distance = (mesh.vertices[w] - mesh.vertices[v]).norm();
                    if image_distance < tol.collision_rel * local[v].min(local[w]) && preimage_distance > separation {
                        collision_count += 1;
                        if collisions.len() < MAX_EXAMPLES {
                            collisions.push(CollisionPair { vertices: [v, w], preimage_distance, image_distance });
                        }
                    }
                }
            }
        }
    }

    InjectivityReport {
        n_probe: n_random,
        n_fold_probes: probes.len() - n_random,
        probes_with_winding_one,
        multi_sheet_probes,
        probe_witnesses,
        collision_count,
        collision_examples: collisions,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateDiagnostics {
    pub loop_residual: f64,
    pub field_scale: f64,
    /// Max Beltrami residual away from the two outermost bands.
    pub beltrami_residual_interior: f64,
    pub beltrami_residual_max: f64,
    pub max_f_z: f64,
    /// `max |f_z̄| / |f_z|` against the sampled dilatation bound.
    pub max_dilatation: f64,
    pub k_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub sweep: AlphaSweep,
    pub xi_count: Option<i64>,
    pub xi_error: Option<String>,
    /// `critical_count` and `xi_field_count` agree wherever both apply.
    pub counters_agree: Option<bool>,
    pub m_plus_one: Option<MPlusOneReport>,
    pub m_plus_one_error: Option<String>,
    pub homotopy: Option<HomotopyRecord>,
    pub conjugate: Option<ConjugateDiagnostics>,
    pub conjugate_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub check: BoundaryCheck,
    pub verdict: Verdict,
    pub min_boundary_det: f64,
    pub median_boundary_det: f64,
    /// Threshold the checked minimum is compared against.
    pub boundary_tolerance: f64,
    /// Minimum over vertices inside the non-convex arcs, if there are any.
    pub nc_min_det: Option<f64>,
    pub nonconvex_arcs: Vec<ThetaInterval>,
    pub checked_vertices: usize,
    /// Runs of checked vertices with `det DU ≤ tolerance`.
    pub failing_arcs: Vec<ThetaInterval>,
    pub low_confidence_vertices: usize,
    pub topology: Option<TopologyReport>,
    pub interior_min_det: Option<f64>,
    pub folded_triangles: Option<usize>,
    pub injectivity: Option<InjectivityReport>,
    pub mesh_h: f64,
    pub solver: Option<SolverKind>,
    pub max_solve_residual: Option<f64>,
    pub tolerances: Tolerances,
    pub diagnostics: Vec<String>,
}

/// Everything computed along the way, for callers that export fields.
pub struct Certification {
    pub report: CertificateReport,
    pub mapping: Option<DiscreteMapping>,
    pub stream: Option<StreamFunction>,
}

fn failing_runs(theta: &[f64], bad: &[bool]) -> Vec<ThetaInterval> {
    let n = bad.len();
    if n == 0 || !bad.iter().any(|b| *b) {
        return Vec::new();
    }
    if bad.iter().all(|b| *b) {
        return vec![ThetaInterval { start: 0.0, end: std::f64::consts::TAU }];
    }
    let s = bad.iter().position(|b| !*b).expect("some vertex passes");
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        if bad[(s + k) % n] {
            let start = (s + k) % n;
            let mut len = 0;
            while k < n && bad[(s + k) % n] {
                k += 1;
                len += 1;
            }
            let end = start + len - 1;
            let t0 = theta[start];
            let t1 = theta[end % n] + if end >= n { std::f64::consts::TAU } else { 0.0 };
            out.push(ThetaInterval { start: t0, end: t1 });
        } else {
            k += 1;
        }
    }
    out
}

fn corroborate(
    sigma: &SigmaField,
    phi: &BoundaryMap,
    mesh: &DiskMesh,
    mapping: &DiscreteMapping,
    opts: &CertifyOptions,
    diagnostics: &mut Vec<String>,
) -> (TopologyReport, Option<StreamFunction>) {
    let sweep = alpha_sweep(mapping, mesh, opts.n_alpha);
    let (xi_count, xi_error) = match xi_field_count(mapping) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let counters_agree = match (xi_count, sweep.constant) {
        (Some(x), true) => sweep.m.map(|m| m == x),
        (Some(x), false) => {
            // compare against every defined α with α in (0, π)
            let defined: Vec<i64> = sweep.counts.iter().skip(1).flatten().copied().collect();
            if defined.is_empty() {
                None
            } else {
                Some(defined.iter().all(|c| *c == x))
            }
        }
        (None, _) => None,
    };
    let mut report = TopologyReport {
        sweep,
        xi_count,
        xi_error,
        counters_agree,
        m_plus_one: None,
        m_plus_one_error: None,
        homotopy: None,
        conjugate: None,
        conjugate_error: None,
    };
    let base = mesh.boundary_loop[0];
    let v1 = match stream_function_with_tol(sigma, &mapping.u1, mesh, base, opts.tolerances.loop_residual) {
        Ok(v) => v,
        Err(e) => {
            diagnostics.push(format!("stream function: {e}"));
            report.conjugate_error = Some(e.to_string());
            return (report, None);
        }
    };
    let fmap = complex_map(&mapping.u1, &v1, mesh);
    let pair = barycentric_pair(sigma, mesh);
    let residual = beltrami_residual(&fmap, &pair, mesh);
    let max_dilatation = fmap
        .f_z
        .iter()
        .zip(&fmap.f_zbar)
        .filter(|(a, _)| a.norm() > 0.0)
        .map(|(a, b)| b.norm() / a.norm())
        .fold(0.0, f64::max);
    report.conjugate = Some(ConjugateDiagnostics {
        loop_residual: v1.loop_residual,
        field_scale: v1.field_scale,
        beltrami_residual_interior: residual.max_inside(mesh, 2),
        beltrami_residual_max: residual.max,
        max_f_z: fmap.f_z.iter().map(|z| z.norm()).fold(0.0, f64::max),
        max_dilatation,
        k_bound: pair.k_bound,
    });
    match verify_m_plus_one(&fmap, &report.sweep, phi, mesh) {
        Ok(r) => report.m_plus_one = Some(r),
        Err(e) => {
            diagnostics.push(format!("winding identities: {e}"));
            report.m_plus_one_error = Some(e.to_string());
        }
    }
    report.homotopy = Some(homotopy_check(mapping, &v1, sigma, mesh, opts.n_t));
    (report, Some(v1))
}

/// A report with no evidence yet, verdict `Inconclusive`.
pub fn empty_report(check: BoundaryCheck, mesh: &DiskMesh, tol: Tolerances) -> CertificateReport {
    CertificateReport {
        check,
        verdict: Verdict::Inconclusive,
        min_boundary_det: f64::NAN,
        median_boundary_det: f64::NAN,
        boundary_tolerance: f64::NAN,
        nc_min_det: None,
        nonconvex_arcs: Vec::new(),
        checked_vertices: 0,
        failing_arcs: Vec::new(),
        low_confidence_vertices: 0,
        topology: None,
        interior_min_det: None,
        folded_triangles: None,
        injectivity: None,
        mesh_h: mesh.h,
        solver: None,
        max_solve_residual: None,
        tolerances: tol,
        diagnostics: Vec::new(),
    }
}

/// Full certification run with the chosen boundary set.
pub fn run_certification(
    sigma: &SigmaField,
    phi: &BoundaryMap,
    mesh: &DiskMesh,
    check: BoundaryCheck,
    opts: &CertifyOptions,
) -> Certification {
    match solve_mapping(sigma, mesh, phi) {
        Ok(mapping) => {
            let (report, stream) = assess(sigma, phi, mesh, &mapping, check, opts);
            Certification { report, mapping: Some(mapping), stream }
        }
        Err(e) => {
            let mut report = empty_report(check, mesh, opts.tolerances);
            report.diagnostics.push(format!("solver: {e}"));
            Certification { report, mapping: None, stream: None }
        }
    }
}

/// Certifies an already solved mapping.
pub fn assess(
    sigma: &SigmaField,
    phi: &BoundaryMap,
    mesh: &DiskMesh,
    mapping: &DiscreteMapping,
    check: BoundaryCheck,
    opts: &CertifyOptions,
) -> (CertificateReport, Option<StreamFunction>) {
    let tol = opts.tolerances;
    let mut diagnostics = Vec::new();
    let mut report = empty_report(check, mesh, tol);
    let decomp: Option<ConvexDecomposition> = match check {
        BoundaryCheck::Nonconvex => Some(convex_decompose(phi, DEFAULT_HULL_SAMPLES, tol.hull_rel)),
        BoundaryCheck::Main => None,
    };
    report.nonconvex_arcs = decomp.as_ref().map(|d| d.gamma_nc.clone()).unwrap_or_default();
    report.solver = Some(mapping.solver);
    report.max_solve_residual = Some(mapping.u1.stats.relative_residual.max(mapping.u2.stats.relative_residual));
    let b = &mapping.boundary;
    let median_det = b.median_abs_det();
    let threshold = tol.det_rel * median_det;
    report.min_boundary_det = b.min_det();
    report.median_boundary_det = median_det;
    report.boundary_tolerance = threshold;
    report.low_confidence_vertices = b.low_confidence.iter().filter(|l| **l).count();

    let in_nc: Vec<bool> = b.theta.iter().map(|&t| decomp.as_ref().is_some_and(|d| d.in_nonconvex_part(t))).collect();
    let checked: Vec<bool> = match check {
        BoundaryCheck::Main => vec![true; b.det.len()],
        BoundaryCheck::Nonconvex => in_nc.clone(),
    };
    report.checked_vertices = checked.iter().filter(|c| **c).count();
    if in_nc.iter().any(|c| *c) {
        report.nc_min_det = Some(b.det.iter().zip(&in_nc).filter(|(_, c)| **c).map(|(d, _)| *d).fold(f64::INFINITY, f64::min));
    }
    let bad: Vec<bool> = b.det.iter().zip(&checked).map(|(d, c)| *c && !(*d > threshold)).collect();
    report.failing_arcs = failing_runs(&b.theta, &bad);
    let boundary_ok = report.failing_arcs.is_empty();
    if report.checked_vertices == 0 {
        diagnostics.push("no boundary vertex lies on a non-convex arc; the boundary condition holds vacuously".into());
    }

    let (topology, stream) = if opts.topology {
        let (t, s) = corroborate(sigma, phi, mesh, mapping, opts, &mut diagnostics);
        (Some(t), s)
    } else {
        (None, None)
    };
    let scan = interior_fold_scan(mapping);
    report.interior_min_det = Some(scan.interior_min_det);
    report.folded_triangles = Some(scan.folded_triangles.len());
    let injectivity = opts.injectivity.then(|| injectivity_oracle(mapping, mesh, opts.n_probe, opts.seed, &tol));

    let verdict = if !boundary_ok {
        Verdict::BoundaryDegenerate
    } else {
        let interior_ok = scan.folded_triangles.is_empty();
        let injective = !injectivity.as_ref().is_some_and(|r| r.has_witness());
        let mut topology_ok = true;
        if let Some(topology) = &topology {
            let sweep_ok = topology.sweep.constant && topology.sweep.m == Some(0);
            let winding_ok = topology.m_plus_one.as_ref().is_some_and(|r| r.m_plus_one_holds && r.wn_phi_is_one);
            let homotopy_ok = topology.homotopy.as_ref().is_some_and(|h| h.min_boundary_det > 0.0);
            if !sweep_ok {
                diagnostics.push(format!("α-sweep is not identically zero: {:?}", topology.sweep.counts));
            }
            if !winding_ok {
                diagnostics.push("winding identities WN(f(∂B)) = M + 1, WN(Φ(∂B)) = 1 not confirmed".into());
            }
            if !homotopy_ok {
                diagnostics.push("homotopy determinant is not positive on ∂B".into());
            }
            topology_ok = sweep_ok && winding_ok && homotopy_ok;
        }
        if !interior_ok {
            diagnostics.push(format!("{} triangles with det DU ≤ 0", scan.folded_triangles.len()));
        }
        if !injective {
            diagnostics.push("injectivity oracle found a witness".into());
        }
        if topology_ok && interior_ok && injective {
            Verdict::Diffeomorphism
        } else if !interior_ok && !injective {
            diagnostics.push("boundary condition holds but the map folds; rerun at a higher resolution".into());
            Verdict::FoldDetected
        } else {
            diagnostics.push("evidence is inconsistent with the boundary certificate; rerun at a higher resolution".into());
            Verdict::Inconclusive
        }
    };
    report.verdict = verdict;
    report.topology = topology;
    report.injectivity = injectivity;
    report.diagnostics = diagnostics;
    (report, stream)
}

pub fn certify_main(sigma: &SigmaField, phi: &BoundaryMap, mesh: &DiskMesh, opts: &CertifyOptions) -> CertificateReport {
    run_certification(sigma, phi, mesh, BoundaryCheck::Main, opts).report
}

pub fn certify_nonconvex(sigma: &SigmaField, phi: &BoundaryMap, mesh: &DiskMesh, opts: &CertifyOptions) -> CertificateReport {
    run_certification(sigma, phi, mesh, BoundaryCheck::Nonconvex, opts).report
}
