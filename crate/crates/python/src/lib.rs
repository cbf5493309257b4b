//! Python bindings: convex specs, discrete steps, Lyapunov certificates and
//! the configuration-driven runners.

use lionphi_core::dynamics::{self, DiscreteConfig as CoreDiscrete, OptState as CoreState};
use lionphi_core::lyapunov;
use lionphi_core::runner::{self, RunConfig};
use lionphi_core::verify::{self, Standard, Suite};
use lionphi_core::{Error, PhiSpec as CoreSpec};
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Usage(_) | Error::Json(_) => PyValueError::new_err(e.to_string()),
        Error::Numeric { .. } | Error::DomainViolation { .. } => PyArithmeticError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A convex function φ from the catalog, built from its JSON description.
#[pyclass(name = "PhiSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPhiSpec {
    inner: CoreSpec,
}

#[pymethods]
impl PyPhiSpec {
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        let inner: CoreSpec = serde_json::from_str(json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn catalog(dim: usize) -> Vec<Self> {
        CoreSpec::catalog(dim).into_iter().map(|inner| Self { inner }).collect()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind_name()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("spec serializes")
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.value(&x).map_err(to_py)
    }

    fn subgrad(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.subgrad(&x).map_err(to_py)
    }

    /// φ*(y), `inf` outside the domain.
    fn conj_value(&self, y: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.conj_value(&y).map_err(to_py)?.to_f64())
    }

    fn dom_distance(&self, y: Vec<f64>) -> PyResult<f64> {
        self.inner.dom_distance(&y).map_err(to_py)
    }

    fn fenchel_gap(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.fenchel_gap(&x, &y).map_err(to_py)?.to_f64())
    }

    fn __repr__(&self) -> String {
        format!("PhiSpec({})", self.to_json())
    }
}

#[pyclass(name = "DiscreteConfig", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyDiscreteConfig {
    inner: CoreDiscrete,
}

#[pymethods]
impl PyDiscreteConfig {
    #[new]
    #[pyo3(signature = (lr, weight_decay, beta1, beta2))]
    fn new(lr: f64, weight_decay: f64, beta1: f64, beta2: f64) -> PyResult<Self> {
        let inner = CoreDiscrete::new(lr, weight_decay, beta1, beta2);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn lr(&self) -> f64 {
        self.inner.lr
    }

    #[getter]
    fn weight_decay(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn beta1(&self) -> f64 {
        self.inner.beta1
    }

    #[getter]
    fn beta2(&self) -> f64 {
        self.inner.beta2
    }

    /// The explicit configuration reproducing this one's implicit steps.
    fn explicit_of_implicit(&self) -> Self {
        Self { inner: dynamics::explicit_of_implicit(&self.inner) }
    }

    /// Lyapunov weights `(a, b, c)`.
    fn coeffs(&self) -> PyResult<(f64, f64, f64)> {
        let k = lyapunov::coeffs(&self.inner).map_err(to_py)?;
        Ok((k.a, k.b, k.c))
    }

    fn __repr__(&self) -> String {
        let c = self.inner;
        format!("DiscreteConfig(lr={}, weight_decay={}, beta1={}, beta2={})", c.lr, c.lambda, c.beta1, c.beta2)
    }
}

#[pyclass(name = "OptState", skip_from_py_object)]
#[derive(Clone)]
struct PyOptState {
    inner: CoreState,
}

#[pymethods]
impl PyOptState {
    #[new]
    #[pyo3(signature = (x, m = None))]
    fn new(x: Vec<f64>, m: Option<Vec<f64>>) -> PyResult<Self> {
        let m = m.unwrap_or_else(|| vec![0.0; x.len()]);
        Ok(Self { inner: CoreState::new(x, m).map_err(to_py)? })
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn m(&self) -> Vec<f64> {
        self.inner.m.clone()
    }

    #[getter]
    fn t(&self) -> u64 {
        self.inner.t
    }

    fn __repr__(&self) -> String {
        format!("OptState(t={}, x={:?}, m={:?})", self.inner.t, self.inner.x, self.inner.m)
    }
}

type StepOut = (PyOptState, Vec<f64>, Vec<f64>);

/// One step with decay on the current iterate; returns `(state, m_tilde, direction)`.
#[pyfunction]
fn step_explicit(cfg: &PyDiscreteConfig, spec: &PyPhiSpec, state: &PyOptState, grad: Vec<f64>) -> PyResult<StepOut> {
    let s = dynamics::step_explicit(&cfg.inner, &spec.inner, &state.inner, &grad).map_err(to_py)?;
    Ok((PyOptState { inner: s.state }, s.m_tilde, s.direction))
}

/// One step with decay on the next iterate; returns `(state, m_tilde, direction)`.
#[pyfunction]
fn step_implicit(cfg: &PyDiscreteConfig, spec: &PyPhiSpec, state: &PyOptState, grad: Vec<f64>) -> PyResult<StepOut> {
    let s = dynamics::step_implicit(&cfg.inner, &spec.inner, &state.inner, &grad).map_err(to_py)?;
    Ok((PyOptState { inner: s.state }, s.m_tilde, s.direction))
}

/// Discrete Lyapunov value at `(x, m)` given `f(x)`; `inf` outside the domain.
#[pyfunction]
fn h_discrete(cfg: &PyDiscreteConfig, spec: &PyPhiSpec, f: f64, x: Vec<f64>, m: Vec<f64>) -> PyResult<f64> {
    let h = lyapunov::h_discrete(&cfg.inner, &spec.inner, f, &x, &m).map_err(to_py)?;
    Ok(h.to_f64())
}

/// Trace CSV for a JSON run configuration.
#[pyfunction]
fn run_trace(config: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config).map_err(to_py)?;
    Ok(runner::trace_to_csv(&runner::run_trace(&cfg).map_err(to_py)?))
}

/// Sweep CSV over `lambdas` for a JSON run configuration.
#[pyfunction]
fn run_sweep(config: &str, lambdas: Vec<f64>) -> PyResult<String> {
    let cfg = RunConfig::from_json(config).map_err(to_py)?;
    Ok(runner::sweep_to_csv(&runner::run_sweep(&cfg, &lambdas).map_err(to_py)?))
}

/// Distributed-run CSV for a JSON run configuration with a `distributed` section.
#[pyfunction]
fn run_distributed(config: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config).map_err(to_py)?;
    Ok(runner::distributed_to_csv(&runner::run_distributed_config(&cfg).map_err(to_py)?))
}

/// JSON report of an invariant suite.
#[pyfunction]
#[pyo3(signature = (suite = "all", seed = 0, samples = 100_000))]
fn verify_suite(py: Python<'_>, suite: &str, seed: u64, samples: usize) -> PyResult<String> {
    let suite: Suite = suite.parse().map_err(to_py)?;
    let report = py.detach(|| verify::run_suite(suite, seed, samples, &Standard)).map_err(to_py)?;
    Ok(report.to_json())
}

#[pymodule]
fn lionphi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPhiSpec>()?;
    m.add_class::<PyDiscreteConfig>()?;
    m.add_class::<PyOptState>()?;
    m.add_function(wrap_pyfunction!(step_explicit, m)?)?;
    m.add_function(wrap_pyfunction!(step_implicit, m)?)?;
    m.add_function(wrap_pyfunction!(h_discrete, m)?)?;
    m.add_function(wrap_pyfunction!(run_trace, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_distributed, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    Ok(())
}
