//! Python bindings: `import pyqubofit`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use qubofit::basis::BasisSet;
use qubofit::data::{self, GeneratorKind, GeneratorSpec};
use qubofit::dynprog::{analytic_jit_policy, JitParams, Policy};
use qubofit::encoding::{self, QuboProblem};
use qubofit::error::Error;
use qubofit::harness::{self, DpMethod, Experiment, ExperimentSpec, Scenario};
use qubofit::leastsq::{assemble, Dataset};
use qubofit::solvers::{self, Backend, SolverParams};
use serde_json::Value;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_backend(name: &str) -> PyResult<Backend> {
    Backend::parse(name, None).map_err(to_py)
}

fn params_for(
    backend: &Backend,
    seed: u64,
    restarts: Option<usize>,
    iterations: Option<usize>,
) -> SolverParams {
    let mut params = harness::default_params(backend, seed);
    if let Some(r) = restarts {
        params.restarts = r;
    }
    if let Some(i) = iterations {
        params.iterations_per_restart = i;
    }
    params
}

/// Hand a JSON value to Python through the `json` module.
fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

fn policy_json(strategy: &str, policy: &Policy) -> Value {
    serde_json::json!({
        "strategy": strategy,
        "actions": policy.actions,
        "states": policy.states,
        "total_cost": policy.total_cost,
    })
}

/// Two's complement fixed-point format with `digits` bits, `point` of them
/// fractional.
#[pyclass(name = "FixedPointFormat", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyFormat(encoding::FixedPointFormat);

#[pymethods]
impl PyFormat {
    #[new]
    fn new(digits: u32, point: u32) -> PyResult<Self> {
        encoding::FixedPointFormat::new(digits, point)
            .map(PyFormat)
            .map_err(to_py)
    }

    #[getter]
    fn digits(&self) -> u32 {
        self.0.digits()
    }

    #[getter]
    fn point(&self) -> u32 {
        self.0.point()
    }

    #[getter]
    fn step(&self) -> f64 {
        self.0.step()
    }

    #[getter]
    fn min_value(&self) -> f64 {
        self.0.min_value()
    }

    #[getter]
    fn max_value(&self) -> f64 {
        self.0.max_value()
    }

    fn quantize(&self, value: f64) -> PyResult<f64> {
        self.0.quantize(value).map_err(to_py)
    }

    fn encode(&self, coefficients: Vec<f64>) -> PyResult<Vec<u8>> {
        encoding::encode_coefficients(&coefficients, self.0).map_err(to_py)
    }

    fn decode(&self, bits: Vec<u8>, m: usize) -> PyResult<Vec<f64>> {
        encoding::decode_bits(&bits, self.0, m).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "FixedPointFormat(digits={}, point={})",
            self.0.digits(),
            self.0.point()
        )
    }
}

#[pyclass(name = "Basis", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBasis(BasisSet);

#[pymethods]
impl PyBasis {
    /// Hat functions on `m` equidistant knots over `[x_min, x_max]`.
    #[staticmethod]
    fn triangular(x_min: f64, x_max: f64, m: usize) -> PyResult<Self> {
        BasisSet::triangular_uniform(x_min, x_max, m)
            .map(PyBasis)
            .map_err(to_py)
    }

    /// Chebyshev polynomials `T_0 … T_{m−1}` evaluated at raw `x`.
    #[staticmethod]
    fn chebyshev(m: usize) -> PyResult<Self> {
        BasisSet::chebyshev(m).map(PyBasis).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> String {
        format!("{:?}", self.0.kind()).to_lowercase()
    }

    fn eval(&self, j: usize, x: f64) -> PyResult<f64> {
        self.0.eval(j, x).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "Qubo", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQubo(QuboProblem);

#[pymethods]
impl PyQubo {
    #[staticmethod]
    fn from_matrix(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        QuboProblem::from_rows(&rows).map(PyQubo).map_err(to_py)
    }

    /// QUBO of the least-squares fit of `(xs, ys)`; ordinates are min-max
    /// normalized first unless `normalize` is false.
    #[staticmethod]
    #[pyo3(signature = (xs, ys, basis, format, normalize = true))]
    fn for_fit(
        xs: Vec<f64>,
        ys: Vec<f64>,
        basis: &PyBasis,
        format: &PyFormat,
        normalize: bool,
    ) -> PyResult<Self> {
        let data = dataset(xs, ys, normalize)?;
        Ok(PyQubo(encoding::build_qubo(&assemble(&data, &basis.0), format.0)))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let wire: encoding::QuboJson =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        QuboProblem::from_json(&wire).map(PyQubo).map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.to_json()).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.dim()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.0.dim()).map(|i| self.0.row(i).to_vec()).collect()
    }

    fn energy(&self, bits: Vec<u8>) -> PyResult<f64> {
        if bits.len() != self.0.dim() {
            return Err(to_py(Error::DimensionMismatch {
                expected: self.0.dim(),
                got: bits.len(),
            }));
        }
        Ok(self.0.energy(&bits))
    }

    fn decode(&self, bits: Vec<u8>) -> PyResult<Vec<f64>> {
        self.0.decode(&bits).map_err(to_py)
    }

    fn density(&self) -> f64 {
        encoding::density(&self.0)
    }

    fn block_bandwidth(&self) -> Option<usize> {
        self.0.block_bandwidth()
    }

    /// `(couplings, fields, offset)` with couplings strictly upper triangular.
    fn to_ising(&self) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
        let ising = encoding::to_ising(&self.0);
        let n = ising.n;
        let couplings = (0..n)
            .map(|i| ising.couplings[i * n..(i + 1) * n].to_vec())
            .collect();
        (couplings, ising.fields, ising.offset)
    }

    fn __repr__(&self) -> String {
        format!("Qubo(n={})", self.0.dim())
    }
}

fn dataset(xs: Vec<f64>, ys: Vec<f64>, normalize: bool) -> PyResult<Dataset> {
    let raw = Dataset::new(xs, ys).map_err(to_py)?;
    if normalize {
        data::minmax_normalize(&raw).map_err(to_py)
    } else {
        Ok(raw)
    }
}

/// Noisy samples of a test function; returns `(xs, ys)`.
#[pyfunction]
#[pyo3(signature = (kind, n, seed = harness::DEFAULT_SEED, sigma = 0.03, normalize = false))]
fn generate(kind: &str, n: usize, seed: u64, sigma: f64, normalize: bool) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spec = GeneratorSpec {
        noise_sigma: sigma,
        ..GeneratorSpec::new(GeneratorKind::parse(kind).map_err(to_py)?, n, seed)
    };
    let mut data = data::generate(&spec).map_err(to_py)?;
    if normalize {
        data = data::minmax_normalize(&data).map_err(to_py)?;
    }
    Ok((data.xs().to_vec(), data.ys().to_vec()))
}

/// Least-squares fit with any backend; returns a dict with coefficients,
/// rmse and, for QUBO backends, the bits and energy found.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (xs, ys, basis, format, backend = "classical", seed = harness::DEFAULT_SEED, normalize = true))]
fn fit<'py>(
    py: Python<'py>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    basis: &PyBasis,
    format: &PyFormat,
    backend: &str,
    seed: u64,
    normalize: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let data = dataset(xs, ys, normalize)?;
    let backend = parse_backend(backend)?;
    let params = harness::default_params(&backend, seed);
    let sys = assemble(&data, &basis.0);
    let (result, solved) = py
        .detach(|| solvers::solve_fit_detailed(&sys, format.0, &backend, &params))
        .map_err(to_py)?;
    let mut out = serde_json::json!({
        "backend": backend.label(),
        "coefficients": result.coefficients,
        "rmse": data::rmse(&result, &data),
    });
    if let Some(s) = solved {
        out["bits"] = serde_json::json!(s.bits);
        out["energy"] = serde_json::json!(s.energy);
    }
    json_to_py(py, &out)
}

/// Minimize a QUBO; returns `(bits, energy)`.
#[pyfunction]
#[pyo3(signature = (qubo, backend = "tabu", seed = harness::DEFAULT_SEED, restarts = None, iterations = None))]
fn solve(
    py: Python<'_>,
    qubo: &PyQubo,
    backend: &str,
    seed: u64,
    restarts: Option<usize>,
    iterations: Option<usize>,
) -> PyResult<(Vec<u8>, f64)> {
    let backend = parse_backend(backend)?;
    if !backend.is_qubo() {
        return Err(PyValueError::new_err("classical backend does not solve QUBOs"));
    }
    let params = params_for(&backend, seed, restarts, iterations);
    let result = py
        .detach(|| solvers::solve_qubo(&qubo.0, &backend, &params))
        .map_err(to_py)?;
    Ok((result.bits, result.energy))
}

/// Closed-form optimal policy of the still-water arrival problem.
#[pyfunction]
#[pyo3(signature = (ell = 100.0, v_max = 50.0, alpha = 100.0, horizon = 4, x0 = 0.0))]
fn analytic_policy<'py>(
    py: Python<'py>,
    ell: f64,
    v_max: f64,
    alpha: f64,
    horizon: usize,
    x0: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let policy =
        analytic_jit_policy(&JitParams::still_water(ell, v_max, alpha), horizon, x0).map_err(to_py)?;
    json_to_py(py, &policy_json("analytic", &policy))
}

/// Solve a scenario (JSON text, defaults when omitted) with `method`
/// `analytic`, `grid` or `fitted`; returns the policy as a dict.
#[pyfunction]
#[pyo3(signature = (scenario = None, method = "fitted", backend = None))]
fn dp<'py>(
    py: Python<'py>,
    scenario: Option<&str>,
    method: &str,
    backend: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let scenario = match scenario {
        Some(text) => Scenario::from_json(text).map_err(to_py)?,
        None => Scenario::default(),
    };
    let method: DpMethod = method.parse().map_err(to_py)?;
    let backend = parse_backend(backend.unwrap_or(&scenario.backend))?;
    let outcome = py
        .detach(|| harness::run_dp(&scenario, method, backend))
        .map_err(to_py)?;
    json_to_py(py, &policy_json(&outcome.strategy, &outcome.policy))
}

/// Run a named experiment into `out_dir`; `overrides` is a JSON object.
/// Returns the manifest as a dict.
#[pyfunction]
#[pyo3(signature = (name, out_dir, seed = harness::DEFAULT_SEED, overrides = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    name: &str,
    out_dir: PathBuf,
    seed: u64,
    overrides: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let experiment: Experiment = name.parse().map_err(to_py)?;
    let mut spec = ExperimentSpec::new(experiment, seed, out_dir);
    if let Some(text) = overrides {
        let value: Value = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(PyValueError::new_err("overrides must be a JSON object"));
        };
        for (key, value) in map {
            spec = spec.with_override(&key, value);
        }
    }
    let manifest = py.detach(|| harness::run_experiment(&spec)).map_err(to_py)?;
    let value = serde_json::to_value(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

#[pymodule]
fn pyqubofit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFormat>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PyQubo>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_policy, m)?)?;
    m.add_function(wrap_pyfunction!(dp, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
