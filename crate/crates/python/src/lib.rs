//! Python bindings: configs, per-realization channel quantities, estimators,
//! combiners and whole experiments.

use std::path::PathBuf;

use nlmimo::constellation::Constellation as CoreConstellation;
use nlmimo::estimators::{dua_effective, dua_lmmse};
use nlmimo::harness::{dl_channel, run_experiment as core_run, ExperimentConfig, ExperimentKind, Setup, SystemModel};
use nlmimo::linalg::{CMat, CVec, C64};
use nlmimo::neural::EstimatorModel;
use nlmimo::receivers::{self, CombinerKind};
use nlmimo::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyFileNotFoundError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(nlmimo, ConfigError, PyValueError);
create_exception!(nlmimo, MissingModelError, PyFileNotFoundError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::ConfigMismatch { .. } => ConfigError::new_err(e.to_string()),
        Error::MissingModel(_) => MissingModelError::new_err(e.to_string()),
        Error::UnsupportedConstellation(_)
        | Error::OddMomentOrder(_)
        | Error::MomentOrderTooLarge { .. }
        | Error::InvalidArgument(_)
        | Error::Dimension(_)
        | Error::UnsupportedOrder(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Rows = Vec<Vec<C64>>;

fn rows(m: &CMat) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &Rows) -> PyResult<CMat> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(CMat::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(frozen)]
struct Constellation(CoreConstellation);

#[pymethods]
impl Constellation {
    /// `qpsk`, `qam16`, `qam64`, `qam256` or `gaussian`.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        CoreConstellation::from_name(name).map(Self).map_err(to_py)
    }

    #[getter]
    fn symbols(&self) -> Vec<C64> {
        self.0.symbols().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<u32> {
        self.0.labels().to_vec()
    }

    #[getter]
    fn bits_per_symbol(&self) -> usize {
        self.0.bits_per_symbol()
    }

    /// `E|s|^l` for even `l`.
    fn moment(&self, l: usize) -> PyResult<f64> {
        self.0.moment(l).map_err(to_py)
    }

    fn decide(&self, z: C64) -> usize {
        self.0.decide(z)
    }
}

/// Validated experiment configuration.
#[pyclass(frozen)]
struct Config(ExperimentConfig);

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (json = "{}", overrides = Vec::new()))]
    fn new(json: &str, overrides: Vec<String>) -> PyResult<Self> {
        ExperimentConfig::from_json_with_overrides(json, &overrides).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        ExperimentConfig::load(&path, &overrides).map(Self).map_err(to_py)
    }

    fn hash(&self) -> String {
        self.0.hash()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.0).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Seeded system: setups and realizations are pure functions of their indices.
#[pyclass(frozen)]
struct System(SystemModel);

impl System {
    fn setup(&self, index: usize) -> PyResult<Setup> {
        if index >= self.0.config.setups {
            return Err(PyValueError::new_err(format!("setup {index} out of range")));
        }
        self.0.setup(index).map_err(to_py)
    }
}

#[pymethods]
impl System {
    #[new]
    fn new(config: &Config) -> PyResult<Self> {
        SystemModel::new(&config.0).map(Self).map_err(to_py)
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.0.config.scenario.m
    }

    #[getter]
    fn users(&self) -> usize {
        self.0.config.scenario.k
    }

    /// Large-scale quantities of one setup.
    fn setup_info<'py>(&self, py: Python<'py>, setup: usize) -> PyResult<Bound<'py, PyDict>> {
        let s = self.setup(setup)?;
        let d = PyDict::new(py);
        d.set_item("beta", s.ls.beta.clone())?;
        d.set_item("gbar", rows(&s.ls.gbar))?;
        d.set_item("power", s.ls.power.clone())?;
        d.set_item("eta", s.ls.eta.clone())?;
        d.set_item("sigma2", s.ls.sigma2)?;
        Ok(d)
    }

    /// Channel, received pilots and the true effective channel set of one realization.
    fn realization<'py>(&self, py: Python<'py>, setup: usize, r: usize) -> PyResult<Bound<'py, PyDict>> {
        let s = self.setup(setup)?;
        let real = self.0.realization(&s, r).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("g", rows(&real.g))?;
        d.set_item("pilots_rx", rows(&real.pilots_rx))?;
        d.set_item("c", rows(&real.truth.c))?;
        d.set_item("czz", real.truth.czz.as_ref().map(rows))?;
        d.set_item("cmumu", real.truth.cmumu.as_ref().map(rows))?;
        d.set_item("sigma2", real.truth.sigma2)?;
        Ok(d)
    }

    /// Effective-channel estimate: `dua-lmmse`, `da-lmmse`, or `dl` with `model` a saved channel net.
    #[pyo3(signature = (setup, r, estimator, model = None))]
    fn estimate(&self, setup: usize, r: usize, estimator: &str, model: Option<PathBuf>) -> PyResult<Rows> {
        let s = self.setup(setup)?;
        let real = self.0.realization(&s, r).map_err(to_py)?;
        let est = match estimator {
            "dua-lmmse" => {
                let ghat = dua_lmmse(&real.pilots_rx, &self.0.pilots, &s.ls).map_err(to_py)?;
                dua_effective(&ghat, &s.bs, self.0.ue.get(0), &s.ls.eta)
            }
            "da-lmmse" => self.0.da_moments(&s).map_err(to_py)?.estimate(&real.pilots_rx),
            "dl" => {
                let path = model.ok_or_else(|| MissingModelError::new_err("the dl estimator needs a model path"))?;
                let net = EstimatorModel::load(&path).map_err(to_py)?;
                dl_channel(&self.0, &s, &real.pilots_rx, &net).map_err(to_py)?
            }
            other => return Err(ConfigError::new_err(format!("unknown channel estimator '{other}'"))),
        };
        Ok(rows(&est))
    }
}

/// Combining matrix (M x K) of one receiver family.
#[pyfunction]
#[pyo3(signature = (kind, c, sigma2, czz = None, cmumu_diag = None))]
fn combiners(kind: &str, c: Rows, sigma2: f64, czz: Option<Rows>, cmumu_diag: Option<Vec<f64>>) -> PyResult<Rows> {
    let kind: CombinerKind = kind.parse().map_err(to_py)?;
    let c = matrix(&c)?;
    let czz = czz.as_ref().map(matrix).transpose()?;
    let set = receivers::combiners(kind, &c, czz.as_ref(), cmumu_diag.as_deref(), sigma2).map_err(to_py)?;
    Ok(rows(&set.v))
}

/// SINR of UE `k` under combiner `v`.
#[pyfunction]
fn sinr(v: Vec<C64>, c: Rows, cmumu: Rows, k: usize) -> PyResult<f64> {
    receivers::sinr(&CVec::from_vec(v), &matrix(&c)?, &matrix(&cmumu)?, k).map_err(to_py)
}

/// `log2(1 + SINR)` averaged over the given SINR samples.
#[pyfunction]
fn se_lower_bound(sinrs: Vec<f64>) -> f64 {
    receivers::se_lower_bound(&sinrs)
}

/// Runs an experiment (`se-cdf`, `nmse-channel`, ...) and returns its summary.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, kind: &str, config: &Config, out: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let kind: ExperimentKind = kind.parse().map_err(to_py)?;
    let cfg = config.0.clone();
    let summary = py.detach(move || core_run(kind, &cfg, &out)).map_err(to_py)?;
    json_to_py(py, &summary)
}

#[pymodule(name = "nlmimo")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("MissingModelError", m.py().get_type::<MissingModelError>())?;
    m.add_class::<Constellation>()?;
    m.add_class::<Config>()?;
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(combiners, m)?)?;
    m.add_function(wrap_pyfunction!(sinr, m)?)?;
    m.add_function(wrap_pyfunction!(se_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
