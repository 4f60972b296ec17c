//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use certify_core::certify::{assess, BoundaryCheck, CertificateReport, Verdict};
use certify_core::coeff::{dilatations, reduce_to_ab, SigmaField};
use certify_core::conjugate::{rotate, stream_function};
use certify_core::gallery::{self, GALLERY};
use certify_core::geometry::{convex_decompose, BoundaryMap, DiskMesh, DEFAULT_HULL_SAMPLES};
use certify_core::run::run_scenario;
use certify_core::scenario::{Problem, Scenario};
use certify_core::solver::{solve_dirichlet, solve_mapping, DiscreteMapping};
use certify_core::topology::{alpha_sweep, xi_field_count};
use certify_core::Point;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn problem(name: &str, resolution: usize) -> (Scenario, Problem) {
    let mut s = gallery::find(name).expect("gallery entry").scenario();
    s.resolution = resolution;
    let p = s.resolve(Path::new(".")).expect("gallery scenario resolves");
    (s, p)
}

fn solve(p: &Problem) -> DiscreteMapping {
    solve_mapping(&p.sigma, &p.mesh, &p.phi).expect("solve")
}

fn certificate(p: &Problem, m: &DiscreteMapping, check: BoundaryCheck) -> CertificateReport {
    assess(&p.sigma, &p.phi, &p.mesh, m, check, &p.options).0
}

// f_z and f_z̄ of f = u + iv from the two real gradients.
fn wirtinger(gu: Vector2<f64>, gv: Vector2<f64>) -> (Complex64, Complex64) {
    let fz = Complex64::new(gu.x + gv.y, gv.x - gu.y) * 0.5;
    let fzb = Complex64::new(gu.x - gv.y, gv.x + gu.y) * 0.5;
    (fz, fzb)
}

/// Dilatations recovered from two probe gradients: with `∇v = Jσ∇u` the map
/// `∇u ↦ (f_z, f_z̄)` is real-linear, so `f_z̄ = μ f_z + ν conj(f_z)` is a 2×2
/// complex system in `(μ, ν)`.
fn probe_dilatations(m: &Matrix2<f64>) -> (Complex64, Complex64) {
    let (a1, b1) = wirtinger(Vector2::x(), rotate(m * Vector2::x()));
    let (a2, b2) = wirtinger(Vector2::y(), rotate(m * Vector2::y()));
    let det = a1 * a2.conj() - a1.conj() * a2;
    ((b1 * a2.conj() - a1.conj() * b2) / det, (a1 * b2 - a2 * b1) / det)
}

fn disk_samples(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = Point::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        if p.norm_squared() <= 1.0 {
            out.push(p);
        }
    }
    out
}

fn identity_scenario() -> Outcome {
    let s = gallery::find("identity").unwrap().scenario();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = run_scenario(&s, Path::new("."), dir.path()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let c = &out.certificates["main"];
    let t = c.topology.as_ref().ok_or("no topology report")?;
    let wn_f = t.m_plus_one.as_ref().map(|r| r.wn_f);
    ensure(out.verdict == Verdict::Diffeomorphism, format!("verdict {:?}", out.verdict))?;
    ensure((0.98..=1.02).contains(&c.min_boundary_det), format!("min det {}", c.min_boundary_det))?;
    ensure(t.sweep.counts.len() == 16 && t.sweep.counts.iter().all(|k| *k == Some(0)), format!("sweep {:?}", t.sweep.counts))?;
    ensure(wn_f == Some(1), format!("WN(f) {wn_f:?}"))?;
    ensure(elapsed < 5.0, format!("runtime {elapsed:.2} s"))?;
    Ok(format!("min det {:.6}, M_α ≡ 0 over 16 α, WN(f) = 1, runtime {elapsed:.2} s", c.min_boundary_det))
}

fn convergence() -> Outcome {
    let err = |n: usize| {
        let mesh = DiskMesh::build(n, 1.0).unwrap();
        let u = solve_dirichlet(&SigmaField::identity(), &mesh, |t| (2.0 * t).cos()).unwrap();
        mesh.vertices.iter().zip(&u.vertex_values).map(|(p, v)| (v - (p.x * p.x - p.y * p.y)).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(128), err(256));
    let ratio = e1 / e2;
    ensure(ratio >= 3.5, format!("errors {e1:.3e} -> {e2:.3e}, ratio {ratio:.3}"))?;
    Ok(format!("sup error {e1:.3e} -> {e2:.3e}, ratio {ratio:.3}"))
}

fn coefficient_forms() -> Outcome {
    let samples = disk_samples(10_000, 7);
    let mut lines = Vec::new();
    for e in GALLERY {
        let (_, p) = problem(e.name, 256);
        if p.sigma.smoothness().is_lipschitz() {
            let ab = reduce_to_ab(&p.sigma, 1e-5).map_err(|err| format!("{}: {err}", e.name))?;
            let worst = samples.iter().map(|q| (ab.at(*q).a.determinant() - 1.0).abs()).fold(0.0, f64::max);
            ensure(worst <= 1e-12, format!("{}: |det A - 1| = {worst:e}", e.name))?;
        }
        let mut k = 0.0f64;
        for t in 0..p.mesh.triangles.len() {
            let m = p.sigma.at(p.mesh.barycenter(t));
            let (mu, nu) = probe_dilatations(&m);
            let (lib_mu, lib_nu) = dilatations(&m);
            ensure((mu - lib_mu).norm() + (nu - lib_nu).norm() < 1e-12, format!("{}: dilatation mismatch", e.name))?;
            k = k.max(mu.norm() + nu.norm());
        }
        ensure(k < 1.0 - 1e-3, format!("{}: max |μ|+|ν| = {k}", e.name))?;
        lines.push(format!("{} {k:.4}", e.name));
    }
    Ok(format!("det A = 1 on Lipschitz fields; max |μ|+|ν|: {}", lines.join(", ")))
}

fn beltrami_closure() -> Outcome {
    let mut worst_loop = 0.0f64;
    let mut worst_belt = 0.0f64;
    for e in GALLERY {
        let (_, p) = problem(e.name, 512);
        let mesh = &p.mesh;
        let m = solve(&p);
        let v = stream_function(&p.sigma, &m.u1, mesh, mesh.boundary_loop[0]).map_err(|err| format!("{}: {err}", e.name))?;
        let rel_loop = v.loop_residual / v.field_scale;
        ensure(rel_loop <= 1e-6, format!("{}: loop residual {:e} vs scale {:e}", e.name, v.loop_residual, v.field_scale))?;
        let mut max_fz = 0.0f64;
        let mut residual = 0.0f64;
        for t in 0..mesh.triangles.len() {
            let gu = mesh.gradient(t, &m.u1.vertex_values);
            let (fz, fzb) = wirtinger(gu, v.gradients[t]);
            max_fz = max_fz.max(fz.norm());
            if mesh.triangle_band(t) + 2 <= mesh.rings {
                let (mu, nu) = probe_dilatations(&p.sigma.at(mesh.barycenter(t)));
                residual = residual.max((fzb - mu * fz - nu * fz.conj()).norm());
            }
        }
        let rel = residual / max_fz;
        ensure(rel <= 1e-3, format!("{}: Beltrami residual {residual:e}, max |f_z| {max_fz:e}", e.name))?;
        worst_loop = worst_loop.max(rel_loop);
        worst_belt = worst_belt.max(rel);
    }
    Ok(format!("n=512, worst loop residual / scale {worst_loop:.2e}, worst Beltrami residual / max|f_z| {worst_belt:.2e}"))
}

fn sweep_constancy() -> Outcome {
    let mut checked = Vec::new();
    for e in GALLERY {
        let (_, p) = problem(e.name, 256);
        let m = solve(&p);
        if !(m.boundary.min_det() > 0.0) {
            continue;
        }
        let sweep = alpha_sweep(&m, &p.mesh, 16);
        ensure(sweep.counts.iter().all(|c| c.is_some() && *c == sweep.counts[0]), format!("{}: sweep {:?}", e.name, sweep.counts))?;
        let xi = xi_field_count(&m).map_err(|err| format!("{}: {err}", e.name))?;
        ensure(sweep.counts[0] == Some(xi), format!("{}: sweep {:?} vs xi {xi}", e.name, sweep.counts[0]))?;
        checked.push(e.name);
    }
    Ok(format!("constant and matching the ξ count on {}", checked.join(", ")))
}

fn winding_identities() -> Outcome {
    for name in ["identity", "ellipse", "anisotropic-const", "variable-hoelder", "skew"] {
        let (_, p) = problem(name, 256);
        let m = solve(&p);
        let c = certificate(&p, &m, BoundaryCheck::Main);
        let t = c.topology.as_ref().ok_or(format!("{name}: no topology"))?;
        let r = t.m_plus_one.as_ref().ok_or(format!("{name}: {:?}", t.m_plus_one_error))?;
        ensure(r.m.is_some_and(|k| r.wn_f == k + 1), format!("{name}: WN(f) {} M {:?}", r.wn_f, r.m))?;
        ensure(r.wn_phi == 1, format!("{name}: WN(Φ) {}", r.wn_phi))?;
        let h = t.homotopy.as_ref().ok_or(format!("{name}: no homotopy"))?;
        ensure(h.min_boundary_det > 0.0, format!("{name}: homotopy min det {}", h.min_boundary_det))?;
    }
    Ok("WN(f) = M + 1, WN(Φ) = 1 and positive homotopy on 5 scenarios".into())
}

fn choquet_necessity() -> Outcome {
    // depth oracle: on a fine mesh the boundary Jacobian changes sign
    let fine = DiskMesh::build(1024, 1.0).unwrap();
    let phi = BoundaryMap::from_expressions(
        gallery::dent(gallery::CHOQUET_STRONG_DEPTH, gallery::CHOQUET_KAPPA, 0.0).x.as_deref().unwrap(),
        gallery::dent(gallery::CHOQUET_STRONG_DEPTH, gallery::CHOQUET_KAPPA, 0.0).y.as_deref().unwrap(),
    )
    .unwrap();
    let fm = solve_mapping(&SigmaField::identity(), &fine, &phi).map_err(|e| e.to_string())?;
    let (lo, hi) = fm.boundary.det.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(*d), b.max(*d)));
    ensure(lo < 0.0 && hi > 0.0, format!("n=1024 det range [{lo}, {hi}] has no sign change"))?;

    let (_, p) = problem("choquet-strong", 256);
    let m = solve(&p);
    let c = certificate(&p, &m, BoundaryCheck::Main);
    ensure(matches!(c.verdict, Verdict::BoundaryDegenerate | Verdict::FoldDetected), format!("verdict {:?}", c.verdict))?;
    let inj = c.injectivity.as_ref().ok_or("no injectivity report")?;
    ensure(inj.has_witness(), "injectivity oracle found no witness")?;
    Ok(format!(
        "n=1024 det in [{lo:.3}, {hi:.3}]; n=256 verdict {:?}, {} multi-sheet probes, {} collisions",
        c.verdict, inj.multi_sheet_probes, inj.collision_count
    ))
}

fn hopf_nonconvex() -> Outcome {
    let (_, p) = problem("dent-hopf", 256);
    let m = solve(&p);
    let nc = certificate(&p, &m, BoundaryCheck::Nonconvex);
    ensure(!nc.nonconvex_arcs.is_empty() && nc.checked_vertices > 0, "dent-hopf has no non-convex arc")?;
    let nc_min = nc.nc_min_det.ok_or("no nc minimum")?;
    ensure(nc_min > nc.boundary_tolerance && nc.failing_arcs.is_empty(), format!("nc min det {nc_min}"))?;
    ensure(nc.verdict == Verdict::Diffeomorphism, format!("nonconvex verdict {:?}", nc.verdict))?;
    let main = certificate(&p, &m, BoundaryCheck::Main);
    ensure(main.verdict == Verdict::Diffeomorphism, format!("main verdict {:?}", main.verdict))?;
    let ellipse = BoundaryMap::from_expressions("2*cos(theta)", "sin(theta)").unwrap();
    let d = convex_decompose(&ellipse, DEFAULT_HULL_SAMPLES, 1e-9);
    ensure(d.gamma_nc.is_empty(), format!("ellipse γ_nc {:?}", d.gamma_nc))?;
    Ok(format!("{} checked vertices, nc min det {nc_min:.4}, both certificates Diffeomorphism; ellipse γ_nc empty", nc.checked_vertices))
}

fn determinism() -> Outcome {
    for e in GALLERY {
        let s = e.scenario();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_scenario(&s, Path::new("."), a.path()).map_err(|err| err.to_string())?;
        run_scenario(&s, Path::new("."), b.path()).map_err(|err| err.to_string())?;
        for file in ["report.json", "boundary_profile.csv", "alpha_sweep.csv"] {
            let x = std::fs::read(a.path().join(file)).unwrap();
            let y = std::fs::read(b.path().join(file)).unwrap();
            ensure(x == y, format!("{}: {file} differs between runs", e.name))?;
        }
    }
    Ok(format!("{} scenarios, outputs byte-identical", GALLERY.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("identity scenario", identity_scenario),
        ("manufactured-solution convergence", convergence),
        ("Ab reduction and dilatation bound", coefficient_forms),
        ("Beltrami closure", beltrami_closure),
        ("α-sweep constancy", sweep_constancy),
        ("winding identities and homotopy", winding_identities),
        ("boundary Jacobian necessity", choquet_necessity),
        ("non-convex boundary certificate", hopf_nonconvex),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} [{secs:.1}s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
