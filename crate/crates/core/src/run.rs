//! Running a scenario end to end and writing its output files.
//!
//! Files written to the output directory:
//!
//! - `report.json`: schema-versioned certificate, see [`RunReport`]
//! - `boundary_profile.csv`: `theta,det_DU,confidence`
//! - `alpha_sweep.csv`: `alpha,M_alpha` (empty `M_alpha` where undefined)
//! - `fields.csv` (when requested): `x,y,u1,u2,v`
//!
//! Floats are printed with 17 significant digits so reports are
//! reproducible byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::certify::{assess, empty_report, BoundaryCheck, CertificateReport, Verdict};
use crate::coeff::EllipticityCertificate;
use crate::geometry::BoundaryValidation;
use crate::scenario::{InputError, Problem, Scenario};
use crate::solver::{solve_mapping, DiscreteMapping};

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const EXIT_INPUT_ERROR: i32 = 2;

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty-printed JSON with fixed float formatting and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, PrettyFixed::default());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Pretty printer writing every float as `{:.16e}`.
#[derive(Default)]
struct PrettyFixed {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.inner.$name(writer $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for PrettyFixed {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", format_float(value))
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshStats {
    pub n_boundary: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub rings: usize,
    pub h: f64,
    pub min_triangle_area: f64,
}

#[derive(Serialize)]
pub struct RunReport<'a> {
    pub schema_version: &'static str,
    pub scenario: &'a Scenario,
    pub mesh: MeshStats,
    pub boundary_map: &'a BoundaryValidation,
    pub ellipticity: &'a EllipticityCertificate,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub certificates: BTreeMap<&'static str, CertificateReport>,
}

/// Result of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub name: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub certificates: BTreeMap<&'static str, CertificateReport>,
}

#[derive(Debug)]
pub enum RunError {
    Input(InputError),
    Io(io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Input(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INPUT_ERROR
    }
}

fn check_name(c: BoundaryCheck) -> &'static str {
    match c {
        BoundaryCheck::Main => "main",
        BoundaryCheck::Nonconvex => "nonconvex",
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

fn write_profiles(out: &Path, mapping: &DiscreteMapping, report: &CertificateReport) -> io::Result<()> {
    let b = &mapping.boundary;
    write_csv(
        &out.join("boundary_profile.csv"),
        &["theta", "det_DU", "confidence"],
        (0..b.det.len()).map(|k| {
            vec![format_float(b.theta[k]), format_float(b.det[k]), if b.low_confidence[k] { "low" } else { "high" }.to_string()]
        }),
    )?;
    let (alphas, counts) = match &report.topology {
        Some(t) => (t.sweep.alphas.clone(), t.sweep.counts.clone()),
        None => (Vec::new(), Vec::new()),
    };
    write_csv(
        &out.join("alpha_sweep.csv"),
        &["alpha", "M_alpha"],
        alphas.iter().zip(&counts).map(|(a, c)| vec![format_float(*a), c.map(|m| m.to_string()).unwrap_or_default()]),
    )
}

/// Resolves, solves once, certifies each requested boundary set and writes
/// all output files into `out_dir`.
pub fn run_scenario(scenario: &Scenario, base_dir: &Path, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let problem: Problem = scenario.resolve(base_dir).map_err(RunError::Input)?;
    fs::create_dir_all(out_dir)?;
    let mesh = &problem.mesh;
    let mapping = solve_mapping(&problem.sigma, mesh, &problem.phi);
    let mut certificates = BTreeMap::new();
    let mut stream = None;
    for &check in &problem.checks {
        let report = match &mapping {
            Ok(m) => {
                let (r, s) = assess(&problem.sigma, &problem.phi, mesh, m, check, &problem.options);
                stream = stream.or(s);
                r
            }
            Err(e) => {
                let mut c = empty_report(check, mesh, problem.options.tolerances);
                c.diagnostics.push(format!("solver: {e}"));
                c
            }
        };
        certificates.insert(check_name(check), report);
    }
    // the full-boundary certificate decides when both were requested
    let primary = certificates.get("main").or_else(|| certificates.get("nonconvex")).expect("at least one boundary check");
    let verdict = primary.verdict;
    let exit_code = verdict.exit_code();

    if let Ok(m) = &mapping {
        write_profiles(out_dir, m, primary)?;
        if scenario.dump_fields {
            write_csv(
                &out_dir.join("fields.csv"),
                &["x", "y", "u1", "u2", "v"],
                (0..mesh.vertex_count()).map(|v| {
                    let p = mesh.vertices[v];
                    let sv = stream.as_ref().map(|s| format_float(s.vertex_values[v])).unwrap_or_default();
                    vec![format_float(p.x), format_float(p.y), format_float(m.u1.vertex_values[v]), format_float(m.u2.vertex_values[v]), sv]
                }),
            )?;
        }
    }

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario,
        mesh: MeshStats {
            n_boundary: mesh.n_boundary(),
            vertices: mesh.vertex_count(),
            triangles: mesh.triangles.len(),
            rings: mesh.rings,
            h: mesh.h,
            min_triangle_area: mesh.min_area(),
        },
        boundary_map: &problem.boundary,
        ellipticity: &problem.ellipticity,
        verdict,
        exit_code,
        certificates,
    };
    let text = to_json(&report).map_err(|e| RunError::Io(io::Error::other(e)))?;
    fs::File::create(out_dir.join("report.json"))?.write_all(text.as_bytes())?;
    Ok(RunOutcome { name: scenario.name.clone(), verdict, exit_code, out_dir: out_dir.to_path_buf(), certificates: report.certificates })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-0.25), "-2.5000000000000000e-1");
        let v: f64 = format_float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn json_keeps_fixed_floats_and_integers() {
        #[derive(Serialize)]
        struct T {
            a: f64,
            b: usize,
            c: Vec<f64>,
            d: Option<f64>,
        }
        let s = to_json(&T { a: 0.5, b: 3, c: vec![1e-300], d: None }).unwrap();
        assert!(s.contains("\"a\": 5.0000000000000000e-1"));
        assert!(s.contains("\"b\": 3"));
        assert!(s.contains("1.0000000000000001e-300") || s.contains("1.0000000000000000e-300"));
        assert!(s.contains("\"d\": null"));
        assert!(s.ends_with("}\n"));
    }
}
