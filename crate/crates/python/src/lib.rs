//! Python bindings for `winding_lab`.

use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use winding_lab::analytic;
use winding_lab::harness::{self, Experiment, ExperimentConfig, Overrides};
use winding_lab::intersection::{self, Kernel};
use winding_lab::paths::{self, decompose};
use winding_lab::quadrature::QuadratureConfig;
use winding_lab::regions::{self, LevelMode, RegionEstimate, ResolutionPolicy};
use winding_lab::transport::{self, TransportResult};
use winding_lab::winding::{self, GridSpec};
use winding_lab::{Error, MeasureAtoms, Point};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Domain(_) | Error::Degenerate { .. } => {
            PyValueError::new_err(e.to_string())
        }
        Error::Numeric(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn pt((x, y): (f64, f64)) -> Point {
    Point::new(x, y)
}

fn level_mode(s: &str) -> PyResult<LevelMode> {
    match s {
        "at_least" => Ok(LevelMode::AtLeast),
        "exactly" => Ok(LevelMode::Exactly),
        "abs_at_least" => Ok(LevelMode::AbsAtLeast),
        _ => Err(PyValueError::new_err(format!("unknown level mode '{s}'"))),
    }
}

fn kernel(s: &str) -> PyResult<Kernel> {
    match s {
        "gaussian" => Ok(Kernel::Gaussian),
        "epanechnikov" => Ok(Kernel::Epanechnikov),
        _ => Err(PyValueError::new_err(format!("unknown kernel '{s}'"))),
    }
}

fn policy(resolution: f64) -> ResolutionPolicy {
    ResolutionPolicy::relative(resolution)
}

fn region_dict<'py>(py: Python<'py>, e: &RegionEstimate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("area", e.area)?;
    d.set_item("masked_area", e.masked_area)?;
    d.set_item("resolution", e.resolution)?;
    d.set_item("n_cells", e.cells.len())?;
    d.set_item("inside_count", e.inside_count)?;
    Ok(d)
}

fn transport_dict<'py>(py: Python<'py>, r: &TransportResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("distance", r.distance)?;
    d.set_item("balanced_at_origin", r.balanced_at_origin)?;
    d.set_item("solver", r.to_json()["solver"].as_str().unwrap_or_default())?;
    d.set_item("eps", r.eps)?;
    d.set_item("gap", r.gap)?;
    Ok(d)
}

/// Brownian path on `[0, 1]` sampled at equal steps.
#[pyclass(name = "PlanarPath", module = "winding_lab_py")]
#[derive(Clone)]
struct PyPath(paths::PlanarPath);

#[pymethods]
impl PyPath {
    #[new]
    fn new(vertices: Vec<(f64, f64)>) -> PyResult<Self> {
        paths::PlanarPath::from_vertices(vertices.into_iter().map(pt).collect()).map(PyPath).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (steps, seed, start = (0.0, 0.0)))]
    fn simulate(steps: usize, seed: u64, start: (f64, f64)) -> PyResult<Self> {
        paths::simulate_bm(steps, seed, pt(start)).map(PyPath).map_err(py_err)
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.0.vertices().iter().map(|p| (p.x, p.y)).collect()
    }

    fn close(&self) -> PyCurve {
        PyCurve(self.0.clone().close())
    }

    /// Closures of the `t` equal-time pieces.
    fn pieces(&self, t: usize) -> PyResult<Vec<PyCurve>> {
        Ok(decompose(&self.0, t).map_err(py_err)?.closures().into_iter().map(PyCurve).collect())
    }

    fn __len__(&self) -> usize {
        self.0.vertices().len()
    }
}

/// Path closed by the chord from its end back to its start.
#[pyclass(name = "ClosedCurve", module = "winding_lab_py")]
#[derive(Clone)]
struct PyCurve(paths::ClosedCurve);

#[pymethods]
impl PyCurve {
    #[new]
    fn new(vertices: Vec<(f64, f64)>) -> PyResult<Self> {
        paths::ClosedCurve::polygon(vertices.into_iter().map(pt).collect()).map(PyCurve).map_err(py_err)
    }

    fn winding_number(&self, z: (f64, f64)) -> PyResult<i32> {
        winding::winding_number(&self.0, pt(z)).map_err(py_err)
    }

    /// Row-major winding numbers at grid centres; `None` where masked.
    fn winding_field(
        &self,
        x_min: f64,
        y_min: f64,
        dx: f64,
        dy: f64,
        nx: usize,
        ny: usize,
    ) -> PyResult<Vec<Option<i32>>> {
        let grid = GridSpec::new(x_min, y_min, dx, dy, nx, ny).map_err(py_err)?;
        let f = winding::winding_field(&self.0, &grid);
        Ok(f.values.iter().zip(&f.degenerate_mask).map(|(&w, &m)| (!m).then_some(w)).collect())
    }

    #[pyo3(signature = (n, mode = "at_least", resolution = 1.0 / 16384.0))]
    fn level_set_area<'py>(&self, py: Python<'py>, n: i32, mode: &str, resolution: f64) -> PyResult<Bound<'py, PyDict>> {
        let e = regions::level_set_area(&self.0, n, level_mode(mode)?, &policy(resolution)).map_err(py_err)?;
        region_dict(py, &e)
    }

    #[pyo3(signature = (other, n, m, resolution = 1.0 / 16384.0))]
    fn joint_area<'py>(
        &self,
        py: Python<'py>,
        other: &PyCurve,
        n: i32,
        m: i32,
        resolution: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let e = regions::joint_area(&self.0, &other.0, n, m, &policy(resolution)).map_err(py_err)?;
        region_dict(py, &e)
    }

    fn __len__(&self) -> usize {
        self.0.vertices().len()
    }
}

/// Kernel estimate of the intersection local time of two paths.
#[pyfunction]
#[pyo3(signature = (x, y, scale, kernel_name = "gaussian"))]
fn local_time<'py>(py: Python<'py>, x: &PyPath, y: &PyPath, scale: f64, kernel_name: &str) -> PyResult<Bound<'py, PyDict>> {
    let e = intersection::local_time(&x.0, &y.0, scale, kernel(kernel_name)?).map_err(py_err)?;
    let d = PyDict::new_bound(py);
    d.set_item("value", e.value)?;
    d.set_item("scale", e.scale)?;
    d.set_item("se_proxy", e.se_proxy)?;
    d.set_item("pairs", e.pairs)?;
    d.set_item("dropped_mass_bound", e.dropped_mass_bound)?;
    Ok(d)
}

/// Origin-normalised Wasserstein distance between atom lists `[(x, y, w), ...]`.
#[pyfunction]
#[pyo3(signature = (mu, nu, eps = None))]
fn d1<'py>(py: Python<'py>, mu: Vec<(f64, f64, f64)>, nu: Vec<(f64, f64, f64)>, eps: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let atoms = |v: Vec<(f64, f64, f64)>| MeasureAtoms::new(v.into_iter().map(|(x, y, w)| (Point::new(x, y), w)).collect());
    let mu = atoms(mu).map_err(py_err)?;
    let nu = atoms(nu).map_err(py_err)?;
    let r = match eps {
        None => transport::d1(&mu, &nu),
        Some(e) => transport::d1_regularized(&mu, &nu, e, 10_000),
    }
    .map_err(py_err)?;
    transport_dict(py, &r)
}

#[pyfunction]
fn heat_kernel(t: f64, x: (f64, f64), y: (f64, f64)) -> PyResult<f64> {
    analytic::heat_kernel(t, pt(x), pt(y)).map_err(py_err)
}

#[pyfunction]
fn func_l(z: (f64, f64)) -> PyResult<f64> {
    analytic::func_l(pt(z)).map_err(py_err)
}

#[pyfunction]
fn func_big_l(y: (f64, f64)) -> PyResult<f64> {
    analytic::func_big_l(pt(y), &QuadratureConfig::default()).map_err(py_err)
}

#[pyfunction]
fn coeff_c(n: u32) -> PyResult<f64> {
    analytic::coeff_c(n).map_err(py_err)
}

#[pyfunction]
fn prob_g(n: u32, z: (f64, f64)) -> PyResult<f64> {
    analytic::prob_g(n, pt(z), &QuadratureConfig::default()).map_err(py_err)
}

/// Runs an experiment from config text; returns the `results.json` document as a string.
#[pyfunction]
#[pyo3(signature = (kind, config = ""))]
fn run_experiment(py: Python<'_>, kind: &str, config: &str) -> PyResult<String> {
    let kind: Experiment = kind.parse().map_err(py_err)?;
    let cfg = ExperimentConfig::from_text(kind, config, &Overrides::default()).map_err(py_err)?;
    let report = py.allow_threads(|| harness::run(&cfg)).map_err(py_err)?;
    Ok(report.results_json(false).to_string())
}

#[pymodule]
fn winding_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPath>()?;
    m.add_class::<PyCurve>()?;
    m.add_function(wrap_pyfunction!(local_time, m)?)?;
    m.add_function(wrap_pyfunction!(d1, m)?)?;
    m.add_function(wrap_pyfunction!(heat_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(func_l, m)?)?;
    m.add_function(wrap_pyfunction!(func_big_l, m)?)?;
    m.add_function(wrap_pyfunction!(coeff_c, m)?)?;
    m.add_function(wrap_pyfunction!(prob_g, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
