//! Python bindings for `duelbandit`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

use duelbandit::bench::{self, RunConfig};
use duelbandit::confidence::{self, BetaMode, ConfidenceConfig, DuelingSurface};
use duelbandit::environments::{self as envs, TestFunction};
use duelbandit::estimator::{self, FeedbackMode, History};
use duelbandit::kernels::{KernelFamily, KernelGrid, KernelSpec};
use duelbandit::policies;

fn to_py(err: duelbandit::Error) -> PyErr {
    match err {
        duelbandit::Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Base kernel with its hyperparameters.
#[pyclass(name = "Kernel", module = "duelbandit_py", from_py_object)]
#[derive(Clone)]
struct PyKernel {
    spec: KernelSpec,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (family = "rbf", variance = 1.0, lengthscale = 1.0))]
    fn new(family: &str, variance: f64, lengthscale: f64) -> PyResult<Self> {
        let family = KernelFamily::parse(family).map_err(to_py)?;
        let spec = KernelSpec::new(family, variance, lengthscale).map_err(to_py)?;
        Ok(PyKernel { spec })
    }

    /// `k(x, y)`.
    fn eval(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.spec.eval(&x, &y).map_err(to_py)
    }

    /// Dueling kernel between the pairs `(a, b)` and `(c, d)`.
    fn eval_dueling(&self, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: Vec<f64>) -> PyResult<f64> {
        self.spec.eval_dueling((&a, &b), (&c, &d)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Kernel(family='{}', variance={}, lengthscale={})",
            self.spec.family.name(),
            self.spec.variance,
            self.spec.lengthscale
        )
    }
}

/// A test function on its 10×10 grid with utilities scaled to [-3, 3].
#[pyclass(name = "Environment", module = "duelbandit_py")]
struct PyEnvironment {
    env: envs::Environment,
}

#[pymethods]
impl PyEnvironment {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        let env = envs::Environment::by_name(name).map_err(to_py)?;
        Ok(PyEnvironment { env })
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        TestFunction::ALL.iter().map(|f| f.name()).collect()
    }

    #[getter]
    fn name(&self) -> String {
        self.env.name().to_string()
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        self.env.points().to_vec()
    }

    #[getter]
    fn utilities(&self) -> Vec<f64> {
        self.env.utilities().to_vec()
    }

    #[getter]
    fn optimum_idx(&self) -> usize {
        self.env.optimum_idx()
    }

    #[getter]
    fn minimum_idx(&self) -> usize {
        self.env.minimum_idx()
    }

    fn __len__(&self) -> usize {
        self.env.len()
    }

    fn preference_prob(&self, i: usize, j: usize) -> PyResult<f64> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.env.preference_prob(i, j))
    }

    fn dueling_regret(&self, i: usize, j: usize) -> PyResult<f64> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.env.dueling_regret(i, j))
    }

    fn logistic_regret(&self, i: usize) -> PyResult<f64> {
        self.check(i)?;
        Ok(self.env.logistic_regret(i))
    }
}

impl PyEnvironment {
    fn check(&self, i: usize) -> PyResult<()> {
        if i >= self.env.len() {
            return Err(PyValueError::new_err(format!(
                "index {i} out of range for {} arms",
                self.env.len()
            )));
        }
        Ok(())
    }
}

#[pyfunction]
fn sigmoid(a: f64) -> f64 {
    estimator::sigmoid::value(a)
}

#[pyfunction]
fn kappa(bound: f64) -> f64 {
    confidence::kappa(bound)
}

/// Exploration coefficient; `mode` is `theoretical` or `fixed:<value>`.
#[pyfunction]
#[pyo3(signature = (gamma, bound = 1.0, lam = 0.1, delta = 0.1, mode = "theoretical"))]
fn beta(gamma: f64, bound: f64, lam: f64, delta: f64, mode: &str) -> PyResult<f64> {
    let mode = BetaMode::parse(mode).map_err(to_py)?;
    let conf = ConfidenceConfig::new(bound, lam, delta, mode).map_err(to_py)?;
    Ok(conf.beta(gamma))
}

/// Fits the preference model to `(first, second, first_won)` duels over
/// `points`. Returns a dict with the utility on every point.
#[pyfunction]
#[pyo3(signature = (points, duels, lam = 0.1, kernel = None))]
fn fit_preferences<'py>(
    py: Python<'py>,
    points: Vec<Vec<f64>>,
    duels: Vec<(usize, usize, bool)>,
    lam: f64,
    kernel: Option<PyKernel>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = kernel.map(|k| k.spec).unwrap_or_default();
    let grid = KernelGrid::new(spec, points).map_err(to_py)?;
    let mut hist = History::new(FeedbackMode::Dueling);
    for (i, j, y) in duels {
        hist.push(i, j, y);
    }
    let fit = estimator::fit_in_basis(&hist, &grid, lam, None).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("utility", fit.utility)?;
    out.set_item("alpha", fit.alpha)?;
    out.set_item("converged", fit.converged)?;
    out.set_item("grad_norm", fit.grad_norm)?;
    out.set_item("norm", fit.norm)?;
    Ok(out)
}

/// MaxMinLCB on an explicit `n × n` LCB table. Returns `(leader, follower)`.
#[pyfunction]
#[pyo3(signature = (lcb, mask = None))]
fn maxminlcb_select(lcb: Vec<Vec<f64>>, mask: Option<Vec<bool>>) -> PyResult<(usize, usize)> {
    let n = lcb.len();
    if lcb.iter().any(|row| row.len() != n) || n == 0 {
        return Err(PyValueError::new_err("lcb must be a nonempty square table"));
    }
    let mask = mask.unwrap_or_else(|| vec![true; n]);
    if mask.len() != n || !mask.iter().any(|&m| m) {
        return Err(PyValueError::new_err("mask must have n entries, at least one true"));
    }
    // bands equal the probabilities when σ = 0
    let prob = lcb.into_iter().flatten().collect();
    let surface = DuelingSurface::from_prob_tables(n, prob, vec![0.0; n * n], 0.0);
    Ok(policies::maxminlcb_select(&surface, &mask).0)
}

fn config_from(config: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut c = match config {
        Some(text) => RunConfig::from_kv(text).map_err(to_py)?,
        None => RunConfig::default(),
    };
    if let Some(kw) = overrides {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value = if v.is_instance_of::<PyBool>() {
                v.extract::<bool>()?.to_string()
            } else {
                v.str()?.to_string()
            };
            c.set(&key, &value).map_err(to_py)?;
        }
    }
    c.validate().map_err(to_py)?;
    Ok(c)
}

/// Runs one seed. Keyword arguments override config keys, e.g.
/// `run_trial(0, env="branin", policy="rucb", horizon=50)`.
#[pyfunction]
#[pyo3(signature = (seed, config = None, **overrides))]
fn run_trial<'py>(
    py: Python<'py>,
    seed: u64,
    config: Option<&str>,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let c = config_from(config, overrides)?;
    let rec = py.detach(|| bench::run_trial(&c, seed)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("seed", rec.seed)?;
    out.set_item("cum_regret", rec.cum_regret)?;
    out.set_item("wall_ms", rec.wall_ms)?;
    out.set_item("first", rec.rows.iter().map(|r| r.first).collect::<Vec<_>>())?;
    out.set_item("second", rec.rows.iter().map(|r| r.second).collect::<Vec<_>>())?;
    out.set_item("outcome", rec.rows.iter().map(|r| r.outcome).collect::<Vec<_>>())?;
    out.set_item(
        "step_regret",
        rec.rows.iter().map(|r| r.step_regret).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "cum_regret_curve",
        rec.rows.iter().map(|r| r.cum_regret).collect::<Vec<_>>(),
    )?;
    Ok(out)
}

/// Runs every configured seed and returns the aggregate as a dict.
#[pyfunction]
#[pyo3(signature = (config = None, **overrides))]
fn run<'py>(
    py: Python<'py>,
    config: Option<&str>,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let c = config_from(config, overrides)?;
    let summary = py
        .detach(|| bench::run_seeds(&c).and_then(|r| bench::aggregate(&r)))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("config", c.to_kv())?;
    out.set_item("n_seeds", summary.n_seeds)?;
    out.set_item("mean_cum_regret", summary.mean_cum_regret)?;
    out.set_item("std_err", summary.std_err)?;
    out.set_item("mean_curve", summary.mean_curve)?;
    Ok(out)
}

#[pymodule]
fn duelbandit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_class::<PyEnvironment>()?;
    m.add_function(wrap_pyfunction!(sigmoid, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(fit_preferences, m)?)?;
    m.add_function(wrap_pyfunction!(maxminlcb_select, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
