//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists built from their JSON form.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use ergolab::calibrate::{calibrate as calibrate_suite, FrozenConstants};
use ergolab::entropy::{self, NormTag, VectorFamily};
use ergolab::experiments::{run, Experiment, ExperimentConfig};
use ergolab::forest::{build_forest, ForestConfig};
use ergolab::fourier::{fejer_decompose, large_spectrum, TorusGrid};
use ergolab::grids::DyadicInterval;
use ergolab::{averages, params, signals, Complex64, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParam(_) | Error::Config(_) | Error::Precondition(_) | Error::Resolution(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A finite complex signal on `[start, start + len)`, zero outside.
#[pyclass(name = "Signal", module = "ergolab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySignal(signals::Signal);

#[pymethods]
impl PySignal {
    #[new]
    #[pyo3(signature = (values, start = 0, label = "python"))]
    fn new(values: Vec<Complex64>, start: i64, label: &str) -> PyResult<Self> {
        signals::Signal::new(values, start, label).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn character(theta: f64, h: usize) -> PyResult<Self> {
        signals::gen_character(theta, h).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn rotation_indicator(theta0: f64, arc: (f64, f64), h: usize) -> PyResult<Self> {
        signals::gen_rotation_indicator(theta0, arc, h).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn rademacher(seed: u64, h: usize) -> PyResult<Self> {
        signals::gen_rademacher(seed, h).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn random_phase(seed: u64, h: usize) -> PyResult<Self> {
        signals::gen_random_phase(seed, h).map(Self).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (seed, h, split = 0.5, min_block = 4))]
    fn block_characters(seed: u64, h: usize, split: f64, min_block: usize) -> PyResult<Self> {
        signals::gen_block_characters(seed, h, split, min_block).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn ones(h: usize) -> Self {
        Self(signals::Signal::ones(h))
    }

    /// Reads an `index,re,im` CSV.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        signals::load_signal(path).map(Self).map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        signals::save_signal(&self.0, path).map_err(py_err)
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn start(&self) -> i64 {
        self.0.window_start()
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    fn at(&self, n: i64) -> Complex64 {
        self.0.at(n)
    }

    fn modulate(&self, theta: f64) -> Self {
        Self(signals::modulate(&self.0, theta))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Signal({}, start={}, len={})", self.0.label(), self.0.window_start(), self.0.len())
    }
}

/// The derived parameter ladder as a dict.
#[pyfunction]
#[pyo3(signature = (alpha, tau, delta, a0 = 10.0, cap = 65536))]
fn derive_params<'py>(
    py: Python<'py>,
    alpha: f64,
    tau: f64,
    delta: f64,
    a0: f64,
    cap: u64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &params::derive_params(alpha, tau, delta, a0, cap).map_err(py_err)?)
}

#[pyfunction]
fn bilinear_avg(f: &PySignal, g: &PySignal, m: usize, x: i64, a: i64, alpha: f64) -> Complex64 {
    averages::bilinear_avg(&f.0, &g.0, m, x, a, alpha)
}

#[pyfunction]
fn transference_check<'py>(
    py: Python<'py>,
    f: &PySignal,
    g: &PySignal,
    h: usize,
    m: usize,
    r: i64,
    x0: i64,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &averages::transference_check(&f.0, &g.0, h, m, r, x0, alpha).map_err(py_err)?)
}

/// Largest reconstruction error of the band decomposition with divisor `d`.
#[pyfunction]
fn fejer_residual(f: &PySignal, d: u64) -> PyResult<f64> {
    fejer_decompose(&f.0, d).map(|dec| dec.residual).map_err(py_err)
}

/// Grid frequencies in the large spectrum of `g` on `[start, start + len)`.
#[pyfunction]
fn spectrum(g: &PySignal, start: i64, len: usize, delta: f64, q: usize) -> PyResult<Vec<f64>> {
    let grid = TorusGrid::new(q).map_err(py_err)?;
    large_spectrum(&g.0, (start, len), delta, grid).map_err(py_err)
}

fn family(rows: Vec<Vec<Complex64>>, norm: &str) -> PyResult<VectorFamily> {
    let tag = match norm {
        "l1" => NormTag::L1,
        "l2" => NormTag::L2,
        "sup" => NormTag::Sup,
        other => return Err(PyValueError::new_err(format!("unknown norm `{other}` (l1, l2, sup)"))),
    };
    VectorFamily::new(rows, tag).map_err(py_err)
}

/// `(Ent, Int, Ext)` covering numbers at scale `eps`.
#[pyfunction]
#[pyo3(signature = (rows, eps, norm = "l2"))]
fn entropy_numbers(rows: Vec<Vec<Complex64>>, eps: f64, norm: &str) -> PyResult<(usize, usize, usize)> {
    let v = family(rows, norm)?;
    let ent = entropy::ent(&v, eps).map_err(py_err)?.value;
    let int = entropy::int_cover(&v, eps).map_err(py_err)?.value;
    let ext = entropy::ext_cover(&v, eps).map_err(py_err)?.value;
    Ok((ent, int, ext))
}

#[pyfunction]
#[pyo3(signature = (rows, eps, norm = "l2"))]
fn jump_count(rows: Vec<Vec<Complex64>>, eps: f64, norm: &str) -> PyResult<usize> {
    entropy::jump_count(&family(rows, norm)?, eps).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (rows, r, norm = "l2"))]
fn r_variation(rows: Vec<Vec<Complex64>>, r: f64, norm: &str) -> PyResult<f64> {
    entropy::r_variation(&family(rows, norm)?, r).map(|v| v.value).map_err(py_err)
}

/// Builds a forest over `[0, len(g))` and returns its summary: levels, tops per
/// level and the exceptional ratio for each level.
#[pyfunction]
#[pyo3(signature = (g, delta, v_max, rho = 0.25, t_small = 0.5))]
fn forest_summary<'py>(
    py: Python<'py>,
    g: &PySignal,
    delta: f64,
    v_max: usize,
    rho: f64,
    t_small: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let h = g.0.len();
    if !h.is_power_of_two() || h < 16 {
        return Err(PyValueError::new_err("the signal length must be a power of two, at least 16"));
    }
    let top = h.trailing_zeros();
    let cfg = ForestConfig { min_ratio_log2: 1, ..ForestConfig::new(delta, rho, t_small, v_max, (2..=top).collect()) };
    let forest = py.detach(|| build_forest(&DyadicInterval::plain(top, 0), &g.0, &cfg)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("levels", forest.trees.len())?;
    out.set_item("tops", forest.trees.iter().map(|t| t.tops.len()).collect::<Vec<_>>())?;
    out.set_item("exceptional_ratio", (1..=v_max).map(|v| forest.exceptional_ratio(v)).collect::<Vec<_>>())?;
    Ok(out.into_any())
}

/// Runs an experiment from a config dict and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (experiment, config = None, seed = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    experiment: &str,
    config: Option<&Bound<'py, PyAny>>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let e: Experiment = experiment.parse().map_err(py_err)?;
    let mut cfg = match config {
        Some(c) => {
            let mut value: serde_json::Value = from_py(py, c)?;
            if let Some(obj) = value.as_object_mut() {
                obj.entry("experiment").or_insert_with(|| e.name().into());
            }
            serde_json::from_value::<ExperimentConfig>(value).map_err(|err| PyValueError::new_err(err.to_string()))?
        }
        None => ExperimentConfig::new(e),
    };
    if cfg.experiment != e {
        return Err(PyValueError::new_err(format!("config is for `{}`, not `{e}`", cfg.experiment)));
    }
    if let Some(s) = seed {
        cfg.seed = Some(s);
    }
    let report = py.detach(|| run(&cfg)).map_err(py_err)?;
    to_py(py, &report)
}

/// Calibrates one suite over `seeds`.
#[pyfunction]
fn calibrate<'py>(py: Python<'py>, suite: &str, seeds: Vec<u64>) -> PyResult<Bound<'py, PyAny>> {
    let e: Experiment = suite.parse().map_err(py_err)?;
    let cal = py.detach(|| calibrate_suite(e, &seeds, None)).map_err(py_err)?;
    to_py(py, &cal)
}

/// The committed frozen constants.
#[pyfunction]
fn frozen_constants(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &FrozenConstants::committed().map_err(py_err)?)
}

#[pyfunction]
fn experiments() -> Vec<&'static str> {
    Experiment::ALL.iter().map(|e| e.name()).collect()
}

#[pymodule]
fn _ergolab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySignal>()?;
    m.add_function(wrap_pyfunction!(derive_params, m)?)?;
    m.add_function(wrap_pyfunction!(bilinear_avg, m)?)?;
    m.add_function(wrap_pyfunction!(transference_check, m)?)?;
    m.add_function(wrap_pyfunction!(fejer_residual, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_numbers, m)?)?;
    m.add_function(wrap_pyfunction!(jump_count, m)?)?;
    m.add_function(wrap_pyfunction!(r_variation, m)?)?;
    m.add_function(wrap_pyfunction!(forest_summary, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(frozen_constants, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
