//! Scenario files: the coefficient field, the boundary map and run settings.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certify::{BoundaryCheck, CertifyOptions, Tolerances};
use crate::coeff::{check_ellipticity, direction_grid, EllipticityCertificate, SigmaField, Smoothness, DEFAULT_DIRECTIONS};
use crate::geometry::{validate_boundary_map, BoundaryMap, BoundaryValidation, DiskMesh, MIN_VALIDATION_SAMPLES};
use crate::Point;

pub const DEFAULT_RESOLUTION: usize = 256;
pub const DEFAULT_N_PROBE: usize = 2000;
/// Samples used to validate `Φ` before meshing.
pub const BOUNDARY_VALIDATION_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSpec {
    pub s11: String,
    pub s12: String,
    pub s21: String,
    pub s22: String,
    #[serde(rename = "K")]
    pub k: f64,
    pub smoothness: Smoothness,
}

/// `Φ` as an expression pair in `theta`, or a CSV file with columns
/// `theta,x,y` (relative paths resolve against the scenario file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<String>,
}

impl PhiSpec {
    pub fn expressions(x: &str, y: &str) -> Self {
        PhiSpec { x: Some(x.into()), y: Some(y.into()), points: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Main,
    Nonconvex,
    Topology,
    Injectivity,
}

fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}
fn default_grading() -> f64 {
    1.0
}
fn default_alpha_grid() -> usize {
    crate::topology::DEFAULT_ALPHA_GRID
}
fn default_checks() -> Vec<Check> {
    vec![Check::Main, Check::Topology, Check::Injectivity]
}
fn default_n_probe() -> usize {
    DEFAULT_N_PROBE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub sigma: SigmaSpec,
    pub phi: PhiSpec,
    /// Number of boundary vertices of the mesh.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_checks")]
    pub checks: Vec<Check>,
    #[serde(default = "default_n_probe")]
    pub n_probe: usize,
    #[serde(default)]
    pub seed: u64,
    /// Also write per-vertex `x,y,u1,u2,v`.
    #[serde(default)]
    pub dump_fields: bool,
}

/// A scenario field that failed to parse or validate.
#[derive(Debug, Clone, PartialEq)]
pub struct InputError {
    pub field: String,
    pub message: String,
}

impl InputError {
    pub fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        InputError { field: field.into(), message: message.to_string() }
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scenario field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for InputError {}

/// Everything needed to run a scenario, built and validated.
pub struct Problem {
    pub sigma: SigmaField,
    pub phi: BoundaryMap,
    pub mesh: DiskMesh,
    pub boundary: BoundaryValidation,
    pub ellipticity: EllipticityCertificate,
    pub checks: Vec<BoundaryCheck>,
    pub options: CertifyOptions,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, InputError> {
        serde_json::from_str(text).map_err(|e| {
            // serde reports the offending key in its message
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
                .unwrap_or("<document>")
                .to_string();
            InputError::new(field, msg)
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path).map_err(|e| InputError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn boundary_checks(&self) -> Vec<BoundaryCheck> {
        let mut out = Vec::new();
        if self.checks.contains(&Check::Main) {
            out.push(BoundaryCheck::Main);
        }
        if self.checks.contains(&Check::Nonconvex) {
            out.push(BoundaryCheck::Nonconvex);
        }
        out
    }

    pub fn build_sigma(&self) -> Result<SigmaField, InputError> {
        let s = &self.sigma;
        if !(s.k >= 1.0) {
            return Err(InputError::new("sigma.K", format!("must be a number >= 1, got {}", s.k)));
        }
        let names = ["sigma.s11", "sigma.s12", "sigma.s21", "sigma.s22"];
        let entries = [s.s11.as_str(), s.s12.as_str(), s.s21.as_str(), s.s22.as_str()];
        for (name, src) in names.iter().zip(entries) {
            crate::expr::Expression::parse(src, &["x", "y"]).map_err(|e| InputError::new(*name, e))?;
        }
        SigmaField::from_expressions(entries, s.k, s.smoothness).map_err(|e| InputError::new("sigma", e))
    }

    pub fn build_phi(&self, base_dir: &Path) -> Result<BoundaryMap, InputError> {
        match (&self.phi.x, &self.phi.y, &self.phi.points) {
            (Some(x), Some(y), None) => {
                crate::expr::Expression::parse(x, &["theta"]).map_err(|e| InputError::new("phi.x", e))?;
                crate::expr::Expression::parse(y, &["theta"]).map_err(|e| InputError::new("phi.y", e))?;
                BoundaryMap::from_expressions(x, y).map_err(|e| InputError::new("phi", e))
            }
            (None, None, Some(p)) => {
                let path: PathBuf = base_dir.join(p);
                BoundaryMap::from_csv(&path).map_err(|e| InputError::new("phi.points", e))
            }
            _ => Err(InputError::new("phi", "give either both `x` and `y` expressions or a `points` file")),
        }
    }

    /// Parses, validates and meshes.
    pub fn resolve(&self, base_dir: &Path) -> Result<Problem, InputError> {
        if self.name.trim().is_empty() {
            return Err(InputError::new("name", "must not be empty"));
        }
        if self.alpha_grid == 0 {
            return Err(InputError::new("alpha_grid", "must be at least 1"));
        }
        let checks = self.boundary_checks();
        if checks.is_empty() {
            return Err(InputError::new("checks", "must contain `main` or `nonconvex`"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.det_rel", t.det_rel),
            ("tolerances.loop_residual", t.loop_residual),
            ("tolerances.hull_rel", t.hull_rel),
            ("tolerances.collision_rel", t.collision_rel),
            ("tolerances.collision_separation", t.collision_separation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(InputError::new(name, format!("must be a finite nonnegative number, got {v}")));
            }
        }
        let sigma = self.build_sigma()?;
        let phi = self.build_phi(base_dir)?;
        let boundary = validate_boundary_map(&phi, BOUNDARY_VALIDATION_SAMPLES.max(MIN_VALIDATION_SAMPLES)).map_err(|e| InputError::new("phi", e))?;
        let mesh = DiskMesh::build(self.resolution, self.grading).map_err(|e| {
            let field = if self.grading > 0.0 { "resolution" } else { "grading" };
            InputError::new(field, e)
        })?;
        let mut points: Vec<Point> = mesh.vertices.clone();
        points.extend((0..mesh.triangles.len()).map(|t| mesh.barycenter(t)));
        let ellipticity = check_ellipticity(&sigma, &points, &direction_grid(DEFAULT_DIRECTIONS)).map_err(|e| InputError::new("sigma", e))?;
        if !ellipticity.passes {
            return Err(InputError::new(
                "sigma.K",
                format!(
                    "sigma is not elliptic with K = {}: min σξ·ξ = {:e} at {:?}, min σ⁻¹ξ·ξ = {:e} at {:?}, need >= {:e}",
                    self.sigma.k,
                    ellipticity.min_form,
                    ellipticity.worst_point,
                    ellipticity.min_inverse_form,
                    ellipticity.worst_inverse_point,
                    ellipticity.threshold
                ),
            ));
        }
        let options = CertifyOptions {
            tolerances: self.tolerances,
            n_alpha: self.alpha_grid,
            n_t: crate::topology::DEFAULT_T_GRID,
            n_probe: self.n_probe,
            seed: self.seed,
            topology: self.checks.contains(&Check::Topology),
            injectivity: self.checks.contains(&Check::Injectivity),
        };
        Ok(Problem { sigma, phi, mesh, boundary, ellipticity, checks, options })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "m",
        "sigma": {"s11": "1", "s12": "0", "s21": "0", "s22": "1", "K": 1, "smoothness": "smooth"},
        "phi": {"x": "cos(theta)", "y": "sin(theta)"}
    }"#;

    #[test]
    fn defaults_are_filled_in() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.resolution, 256);
        assert_eq!(s.alpha_grid, 16);
        assert_eq!(s.checks, vec![Check::Main, Check::Topology, Check::Injectivity]);
        assert_eq!(s.tolerances, Tolerances::default());
        let p = s.resolve(Path::new(".")).unwrap();
        assert!(p.ellipticity.passes);
        assert_eq!(p.mesh.n_boundary(), 256);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"name\"", "\"colour\": 1, \"name\"");
        let e = Scenario::from_json(&text).unwrap_err();
        assert_eq!(e.field, "colour");
        let text = MINIMAL.replace("\"K\": 1", "\"K\": 1, \"k\": 2");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("\"s12\": \"0\"", "\"s12\": \"sin(x\"");
        let e = Scenario::from_json(&bad).unwrap().resolve(Path::new(".")).err().expect("input error");
        assert_eq!(e.field, "sigma.s12");
        let bad = MINIMAL.replace("\"s22\": \"1\"", "\"s22\": \"4\"");
        let e = Scenario::from_json(&bad).unwrap().resolve(Path::new(".")).err().expect("input error");
        assert_eq!(e.field, "sigma.K");
        let bad = MINIMAL.replace("sin(theta)", "-sin(theta)");
        let e = Scenario::from_json(&bad).unwrap().resolve(Path::new(".")).err().expect("input error");
        assert_eq!(e.field, "phi");
        let e = Scenario::from_json(MINIMAL.replace("\"name\": \"m\"", "\"name\": \"m\", \"resolution\": 4").as_str())
            .unwrap()
            .resolve(Path::new("."))
            .err()
            .expect("input error");
        assert_eq!(e.field, "resolution");
    }
}
