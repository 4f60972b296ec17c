//! Built-in scenarios. Names are stable identifiers.

use crate::certify::Tolerances;
use crate::coeff::Smoothness;
use crate::scenario::{Check, PhiSpec, Scenario, SigmaSpec, DEFAULT_N_PROBE, DEFAULT_RESOLUTION};

pub struct GalleryEntry {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> (SigmaSpec, PhiSpec, Vec<Check>),
}

impl GalleryEntry {
    pub fn scenario(&self) -> Scenario {
        let (sigma, phi, checks) = (self.build)();
        Scenario {
            name: self.name.to_string(),
            description: self.description.to_string(),
            sigma,
            phi,
            resolution: DEFAULT_RESOLUTION,
            grading: 1.0,
            alpha_grid: crate::topology::DEFAULT_ALPHA_GRID,
            tolerances: Tolerances::default(),
            checks,
            n_probe: DEFAULT_N_PROBE,
            seed: 0,
            dump_fields: false,
        }
    }
}

fn sigma(entries: [&str; 4], k: f64, smoothness: Smoothness) -> SigmaSpec {
    SigmaSpec {
        s11: entries[0].into(),
        s12: entries[1].into(),
        s21: entries[2].into(),
        s22: entries[3].into(),
        k,
        smoothness,
    }
}

fn identity_sigma() -> SigmaSpec {
    sigma(["1", "0", "0", "1"], 1.0, Smoothness::Smooth)
}

fn circle() -> PhiSpec {
    PhiSpec::expressions("cos(theta)", "sin(theta)")
}

/// Radial dent `ρ(θ) = 1 − depth·exp(κ(cos(θ − θ₀) − 1))` of the unit circle.
pub fn dent(depth: f64, kappa: f64, center: f64) -> PhiSpec {
    let rho = format!("(1 - {depth}*exp({kappa}*(cos(theta - {center}) - 1)))");
    PhiSpec::expressions(&format!("{rho}*cos(theta)"), &format!("{rho}*sin(theta)"))
}

fn default_checks() -> Vec<Check> {
    vec![Check::Main, Check::Topology, Check::Injectivity]
}

fn all_checks() -> Vec<Check> {
    vec![Check::Main, Check::Nonconvex, Check::Topology, Check::Injectivity]
}

/// Depth of the strong dent. With κ = 10, `det DU` on ∂B stays positive up
/// to a depth of about 0.38 and changes sign beyond it (n_boundary = 1024).
pub const CHOQUET_STRONG_DEPTH: f64 = 0.6;
pub const CHOQUET_MILD_DEPTH: f64 = 0.25;
pub const CHOQUET_KAPPA: f64 = 10.0;

pub const GALLERY: &[GalleryEntry] = &[
    GalleryEntry {
        name: "identity",
        description: "sigma = I, circle onto itself",
        build: || (identity_sigma(), circle(), default_checks()),
    },
    GalleryEntry {
        name: "ellipse",
        description: "sigma = I, circle onto the ellipse (2 cos t, sin t)",
        build: || (identity_sigma(), PhiSpec::expressions("2*cos(theta)", "sin(theta)"), default_checks()),
    },
    GalleryEntry {
        name: "anisotropic-const",
        description: "sigma = diag(1, 4), circle onto itself",
        build: || (sigma(["1", "0", "0", "4"], 4.0, Smoothness::Smooth), circle(), default_checks()),
    },
    GalleryEntry {
        name: "variable-hoelder",
        description: "sigma = (1 + x^2/2) I, circle onto itself",
        build: || (sigma(["1 + x^2/2", "0", "0", "1 + x^2/2"], 2.0, Smoothness::Hoelder), circle(), default_checks()),
    },
    GalleryEntry {
        name: "skew",
        description: "sigma = I + skew(0.3), circle onto the ellipse (1.2 cos t, 0.8 sin t)",
        build: || {
            (
                sigma(["1", "0.3", "-0.3", "1"], 1.2, Smoothness::Smooth),
                PhiSpec::expressions("1.2*cos(theta)", "0.8*sin(theta)"),
                default_checks(),
            )
        },
    },
    GalleryEntry {
        name: "choquet-mild",
        description: "sigma = I, circle onto a shallow radial dent (depth 0.25); non-convex but still a diffeomorphism",
        build: || (identity_sigma(), dent(CHOQUET_MILD_DEPTH, CHOQUET_KAPPA, 0.0), all_checks()),
    },
    GalleryEntry {
        name: "choquet-strong",
        description: "sigma = I, circle onto a deep radial dent (depth 0.6); det DU changes sign on the dent",
        build: || (identity_sigma(), dent(CHOQUET_STRONG_DEPTH, CHOQUET_KAPPA, 0.0), all_checks()),
    },
    GalleryEntry {
        name: "dent-hopf",
        description: "variable anisotropic sigma, circle onto a dented curve with det DU > 0 on the dent arc",
        build: || {
            (
                sigma(["1.5 + 0.5*x*y", "0.2", "-0.2", "1 + x^2/4"], 2.0, Smoothness::Smooth),
                dent(0.2, 8.0, std::f64::consts::FRAC_PI_2),
                all_checks(),
            )
        },
    },
];

pub fn find(name: &str) -> Option<&'static GalleryEntry> {
    GALLERY.iter().find(|e| e.name == name)
}

pub fn names() -> Vec<&'static str> {
    GALLERY.iter().map(|e| e.name).collect()
}
