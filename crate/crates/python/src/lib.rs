//! Python bindings: scenarios, meshes, coefficient fields, the solver and
//! the certificates. Reports come back as plain dicts.

use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use certify_core::certify::{assess, BoundaryCheck};
use certify_core::coeff::{beltrami_dilatations, SigmaField, Smoothness};
use certify_core::gallery;
use certify_core::geometry::{BoundaryMap, DiskMesh};
use certify_core::run::{run_scenario, to_json, RunError};
use certify_core::scenario::Scenario;
use certify_core::solver::{solve_mapping, DiscreteMapping};
use certify_core::Point;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_check(check: &str) -> PyResult<BoundaryCheck> {
    match check {
        "main" => Ok(BoundaryCheck::Main),
        "nonconvex" => Ok(BoundaryCheck::Nonconvex),
        other => Err(PyValueError::new_err(format!("check must be `main` or `nonconvex`, got `{other}`"))),
    }
}

fn parse_smoothness(s: &str) -> PyResult<Smoothness> {
    match s {
        "hoelder" => Ok(Smoothness::Hoelder),
        "lipschitz" => Ok(Smoothness::Lipschitz),
        "smooth" => Ok(Smoothness::Smooth),
        other => Err(PyValueError::new_err(format!("smoothness must be hoelder, lipschitz or smooth, got `{other}`"))),
    }
}

fn rows(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// A scenario: coefficient field, boundary map and run settings.
#[pyclass(name = "Scenario", module = "sigma_certify", skip_from_py_object)]
#[derive(Clone)]
pub struct PyScenario {
    pub inner: Scenario,
    base_dir: PathBuf,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = Scenario::from_json(text).map_err(value_error)?;
        Ok(PyScenario { inner, base_dir: PathBuf::from(".") })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let inner = Scenario::from_file(&path).map_err(value_error)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(PyScenario { inner, base_dir })
    }

    #[staticmethod]
    fn gallery(name: &str) -> PyResult<Self> {
        let entry = gallery::find(name).ok_or_else(|| PyValueError::new_err(format!("unknown gallery scenario `{name}`")))?;
        Ok(PyScenario { inner: entry.scenario(), base_dir: PathBuf::from(".") })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn resolution(&self) -> usize {
        self.inner.resolution
    }

    #[setter]
    fn set_resolution(&mut self, n: usize) {
        self.inner.resolution = n;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    /// Runs end to end, writes the output files and returns the parsed report.
    fn run<'py>(&self, py: Python<'py>, out_dir: PathBuf) -> PyResult<Bound<'py, PyAny>> {
        let (scenario, base) = (self.inner.clone(), self.base_dir.clone());
        let dir = out_dir.clone();
        py.detach(move || run_scenario(&scenario, &base, &dir)).map_err(|e| match e {
            RunError::Input(e) => value_error(e),
            RunError::Io(e) => PyIOError::new_err(e.to_string()),
        })?;
        let text = std::fs::read_to_string(out_dir.join("report.json")).map_err(|e| PyIOError::new_err(e.to_string()))?;
        json_to_py(py, &text)
    }

    /// Certificate for one boundary set (`main` or `nonconvex`), without
    /// writing files.
    #[pyo3(signature = (check = "main"))]
    fn certify<'py>(&self, py: Python<'py>, check: &str) -> PyResult<Bound<'py, PyAny>> {
        let check = parse_check(check)?;
        let (scenario, base) = (self.inner.clone(), self.base_dir.clone());
        let text = py.detach(move || -> Result<String, String> {
            let p = scenario.resolve(&base).map_err(|e| e.to_string())?;
            let m = solve_mapping(&p.sigma, &p.mesh, &p.phi).map_err(|e| e.to_string())?;
            let (report, _) = assess(&p.sigma, &p.phi, &p.mesh, &m, check, &p.options);
            to_json(&report).map_err(|e| e.to_string())
        });
        json_to_py(py, &text.map_err(PyValueError::new_err)?)
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, resolution={})", self.inner.name, self.inner.resolution)
    }
}

/// Polar-ring triangulation of the unit disk.
#[pyclass(name = "Mesh", module = "sigma_certify", frozen)]
pub struct PyMesh {
    pub inner: DiskMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (n_boundary, grading = 1.0))]
    fn new(n_boundary: usize, grading: f64) -> PyResult<Self> {
        DiskMesh::build(n_boundary, grading).map(|inner| PyMesh { inner }).map_err(value_error)
    }

    #[getter]
    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices.iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles.clone()
    }

    #[getter]
    fn boundary_loop(&self) -> Vec<usize> {
        self.inner.boundary_loop.clone()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn rings(&self) -> usize {
        self.inner.rings
    }

    fn __len__(&self) -> usize {
        self.inner.vertex_count()
    }
}

/// A coefficient field given by four expressions in `x`, `y`.
#[pyclass(name = "Sigma", module = "sigma_certify", frozen)]
pub struct PySigma {
    pub inner: SigmaField,
}

#[pymethods]
impl PySigma {
    #[new]
    #[pyo3(signature = (s11, s12, s21, s22, k, smoothness = "smooth"))]
    fn new(s11: &str, s12: &str, s21: &str, s22: &str, k: f64, smoothness: &str) -> PyResult<Self> {
        let s = parse_smoothness(smoothness)?;
        SigmaField::from_expressions([s11, s12, s21, s22], k, s).map(|inner| PySigma { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn identity() -> Self {
        PySigma { inner: SigmaField::identity() }
    }

    fn at(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        rows(&self.inner.at(Point::new(x, y)))
    }

    /// `(μ, ν)` of the Beltrami equation at a point.
    fn dilatations(&self, x: f64, y: f64) -> (Complex64, Complex64) {
        beltrami_dilatations(&self.inner, Point::new(x, y))
    }
}

/// The boundary map `Φ: ∂B → ℝ²`.
#[pyclass(name = "BoundaryMap", module = "sigma_certify", frozen)]
pub struct PyBoundaryMap {
    pub inner: BoundaryMap,
}

#[pymethods]
impl PyBoundaryMap {
    #[new]
    fn new(x: &str, y: &str) -> PyResult<Self> {
        BoundaryMap::from_expressions(x, y).map(|inner| PyBoundaryMap { inner }).map_err(value_error)
    }

    #[staticmethod]
    fn from_points(theta: Vec<f64>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Self> {
        BoundaryMap::from_points(&theta, &x, &y).map(|inner| PyBoundaryMap { inner }).map_err(value_error)
    }

    fn point(&self, theta: f64) -> (f64, f64) {
        let p = self.inner.point(theta);
        (p.x, p.y)
    }
}

/// A solved mapping `U = (u¹, u²)`.
#[pyclass(name = "Mapping", module = "sigma_certify", frozen)]
pub struct PyMapping {
    pub inner: DiscreteMapping,
}

#[pymethods]
impl PyMapping {
    #[getter]
    fn u1(&self) -> Vec<f64> {
        self.inner.u1.vertex_values.clone()
    }

    #[getter]
    fn u2(&self) -> Vec<f64> {
        self.inner.u2.vertex_values.clone()
    }

    /// `det DU` per triangle.
    #[getter]
    fn jacobians(&self) -> Vec<f64> {
        self.inner.jacobians.clone()
    }

    #[getter]
    fn boundary_theta(&self) -> Vec<f64> {
        self.inner.boundary.theta.clone()
    }

    #[getter]
    fn boundary_det(&self) -> Vec<f64> {
        self.inner.boundary.det.clone()
    }

    fn min_boundary_det(&self) -> f64 {
        self.inner.boundary.min_det()
    }

    fn jacobian_matrix(&self, triangle: usize) -> PyResult<[[f64; 2]; 2]> {
        if triangle >= self.inner.jacobians.len() {
            return Err(PyValueError::new_err(format!("triangle index {triangle} out of range")));
        }
        Ok(rows(&self.inner.jacobian_matrix(triangle)))
    }
}

#[pyfunction(name = "solve_mapping")]
fn py_solve_mapping(py: Python<'_>, sigma: &PySigma, mesh: &PyMesh, phi: &PyBoundaryMap) -> PyResult<PyMapping> {
    let (s, m, p) = (&sigma.inner, &mesh.inner, &phi.inner);
    py.detach(|| solve_mapping(s, m, p)).map(|inner| PyMapping { inner }).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn gallery_names() -> Vec<&'static str> {
    gallery::names()
}

#[pyfunction]
fn gallery_descriptions<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for e in gallery::GALLERY {
        d.set_item(e.name, e.description)?;
    }
    Ok(d)
}

#[pymodule]
fn sigma_certify(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SCHEMA_VERSION", certify_core::run::SCHEMA_VERSION)?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PySigma>()?;
    m.add_class::<PyBoundaryMap>()?;
    m.add_class::<PyMapping>()?;
    m.add_function(wrap_pyfunction!(py_solve_mapping, m)?)?;
    m.add_function(wrap_pyfunction!(gallery_names, m)?)?;
    m.add_function(wrap_pyfunction!(gallery_descriptions, m)?)?;
    Ok(())
}

/// Registers the module in `sys.modules` so embedded interpreters can
/// `import sigma_certify`.
pub fn register(py: Python<'_>) -> PyResult<()> {
    let module = PyModule::new(py, "sigma_certify")?;
    sigma_certify(&module)?;
    py.import("sys")?.getattr("modules")?.set_item("sigma_certify", module)
}
