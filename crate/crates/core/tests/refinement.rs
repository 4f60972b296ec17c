use std::path::Path;

use certify_core::certify::{assess, BoundaryCheck, CertificateReport, Verdict};
use certify_core::gallery::GALLERY;
use certify_core::solver::solve_mapping;

fn certify_at(name: &str, resolution: usize) -> CertificateReport {
    let mut s = certify_core::gallery::find(name).unwrap().scenario();
    s.resolution = resolution;
    let p = s.resolve(Path::new(".")).unwrap();
    let m = solve_mapping(&p.sigma, &p.mesh, &p.phi).unwrap();
    assess(&p.sigma, &p.phi, &p.mesh, &m, BoundaryCheck::Main, &p.options).0
}

#[test]
fn doubling_the_resolution_keeps_verdicts_and_integers() {
    for e in GALLERY {
        let coarse = certify_at(e.name, 256);
        let fine = certify_at(e.name, 512);
        if coarse.verdict == Verdict::Diffeomorphism {
            assert_eq!(fine.verdict, Verdict::Diffeomorphism, "{}", e.name);
        }
        let (tc, tf) = (coarse.topology.unwrap(), fine.topology.unwrap());
        if let (Some(a), Some(b)) = (tc.sweep.m, tf.sweep.m) {
            assert_eq!(a, b, "{}: M", e.name);
        }
        if let (Some(a), Some(b)) = (&tc.m_plus_one, &tf.m_plus_one) {
            assert_eq!((a.wn_f, a.wn_phi), (b.wn_f, b.wn_phi), "{}: windings", e.name);
        }
        // the boundary minimum moves by O(h) at most
        let scale = coarse.median_boundary_det.abs();
        assert!((coarse.min_boundary_det - fine.min_boundary_det).abs() < 0.1 * scale, "{}: {} vs {}", e.name, coarse.min_boundary_det, fine.min_boundary_det);
    }
}

#[test]
fn strong_dent_stays_degenerate_under_refinement() {
    for n in [256, 512] {
        let r = certify_at("choquet-strong", n);
        assert_eq!(r.verdict, Verdict::BoundaryDegenerate, "n = {n}");
        assert!(r.injectivity.unwrap().has_witness(), "n = {n}");
    }
}
