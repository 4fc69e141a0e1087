//! Python module `tikreg`: problems, the value function and its derivatives,
//! rational model fits and parameter-choice rules.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tikreg::experiment::{self, ExperimentConfig, DEFAULT_INTERVAL};
use tikreg::{ExactSource, FitSample, ProblemInstance, RationalModel, Rule, ScanOptions};

fn to_py(e: tikreg::Error) -> PyErr {
    let msg = format!("[{}] {e}", e.code());
    match e {
        tikreg::Error::InvalidArgument(_)
        | tikreg::Error::Format { .. }
        | tikreg::Error::Validation(_)
        | tikreg::Error::Config(_)
        | tikreg::Error::Json(_) => PyValueError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

/// Serializable value → Python object through the `json` module.
fn to_object<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Problem", module = "tikreg", frozen)]
struct PyProblem {
    inner: ProblemInstance,
}

#[pymethods]
impl PyProblem {
    /// Discretized heat equation of the given size (at least 8).
    #[staticmethod]
    fn heat(size: usize) -> PyResult<Self> {
        Ok(Self { inner: tikreg::gen_heat(size).map_err(to_py)? })
    }

    /// `K = diag(sigmas)`, `B = I`, `y = coeffs`.
    #[staticmethod]
    fn diagonal(sigmas: Vec<f64>, coeffs: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: tikreg::gen_diagonal(&sigmas, &coeffs).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: tikreg::load_problem(path).map_err(to_py)? })
    }

    /// Copy with Gaussian noise of relative size `epsilon`.
    fn with_noise(&self, epsilon: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: tikreg::add_noise(&self.inner, epsilon, seed).map_err(to_py)? })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn data_norm_sq(&self) -> f64 {
        self.inner.data_norm_sq()
    }

    #[getter]
    fn y_delta(&self) -> Vec<f64> {
        self.inner.y_delta.iter().copied().collect()
    }

    /// Minimizer and split values at `alpha`: dict with x, phi, psi, f.
    fn solve<'py>(&self, py: Python<'py>, alpha: f64) -> PyResult<Bound<'py, PyAny>> {
        let s = tikreg::solve_tikhonov(&self.inner, alpha).map_err(to_py)?;
        let x: Vec<f64> = s.x.iter().copied().collect();
        to_object(py, &serde_json::json!({ "alpha": s.alpha, "x": x, "phi": s.phi, "psi": s.psi, "f": s.f }))
    }

    /// `[F, F', …, F⁽ᵒʳᵈᵉʳ⁾]` at `alpha` through the derivative chain.
    fn f_derivatives(&self, alpha: f64, order: usize) -> PyResult<Vec<f64>> {
        Ok(tikreg::eval_f_derivatives(&self.inner, alpha, order.max(1)).map_err(to_py)?.values[..=order].to_vec())
    }

    /// `(F, F')` from the singular value decomposition (B = I only).
    fn svd_value(&self, alpha: f64) -> PyResult<(f64, f64)> {
        let cache = tikreg::compute_svd(&self.inner).map_err(to_py)?;
        tikreg::svd_value_function(&cache, alpha).map_err(to_py)
    }

    /// Fits a model with `confluence` conditions at each reference point.
    fn fit(&self, reference_points: Vec<f64>, confluence: usize) -> PyResult<PyModel> {
        let samples = experiment::exact_samples(&self.inner, &reference_points, confluence).map_err(to_py)?;
        let inner = tikreg::fit_model(&samples, confluence, self.inner.data_norm_sq()).map_err(to_py)?;
        Ok(PyModel { inner })
    }

    /// Applies a rule (`morozov`, `damped:1`, `lcurve`, `minprod:1`, `gamma:1`) to the exact F.
    #[pyo3(signature = (rule, interval = DEFAULT_INTERVAL))]
    fn select<'py>(&self, py: Python<'py>, rule: &str, interval: (f64, f64)) -> PyResult<Bound<'py, PyAny>> {
        let rule: Rule = rule.parse().map_err(to_py)?;
        let src = ExactSource::new(&self.inner).map_err(to_py)?;
        let r = rule.run(&src, self.inner.delta, interval, &ScanOptions::default()).map_err(to_py)?;
        to_object(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("Problem(shape={:?}, epsilon={})", self.shape(), self.inner.epsilon)
    }
}

#[pyclass(name = "Model", module = "tikreg", frozen)]
struct PyModel {
    inner: RationalModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: RationalModel::from_json(text).map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    /// `[m, m', …, m⁽ᵒʳᵈᵉʳ⁾]` at `alpha`.
    #[pyo3(signature = (alpha, order = 0))]
    fn eval(&self, alpha: f64, order: usize) -> PyResult<Vec<f64>> {
        self.inner.eval(alpha, order).map_err(to_py)
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.clone()
    }

    #[getter]
    fn q(&self) -> Vec<f64> {
        self.inner.q.clone()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    /// Applies a rule with the model standing in for F; `delta` is the noise norm.
    #[pyo3(signature = (rule, delta, interval = DEFAULT_INTERVAL))]
    fn select<'py>(&self, py: Python<'py>, rule: &str, delta: f64, interval: (f64, f64)) -> PyResult<Bound<'py, PyAny>> {
        let rule: Rule = rule.parse().map_err(to_py)?;
        let r = rule.run(&self.inner, delta, interval, &ScanOptions::default()).map_err(to_py)?;
        to_object(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("Model(degree={}, scale={:e})", self.inner.degree, self.inner.scale)
    }
}

/// Fits a model to explicit samples `[(alpha, [F, F', ...]), ...]`.
#[pyfunction]
fn fit_samples(samples: Vec<(f64, Vec<f64>)>, confluence: usize, scale: f64) -> PyResult<PyModel> {
    let samples = samples
        .into_iter()
        .map(|(a, d)| FitSample::new(a, d))
        .collect::<tikreg::Result<Vec<_>>>()
        .map_err(to_py)?;
    Ok(PyModel { inner: tikreg::fit_model(&samples, confluence, scale).map_err(to_py)? })
}

fn parse_config(config_json: Option<&str>) -> PyResult<ExperimentConfig> {
    match config_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Default experiment configuration as a JSON string.
#[pyfunction]
fn default_config() -> PyResult<String> {
    serde_json::to_string_pretty(&ExperimentConfig::default()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs an experiment (JSON config) and writes its artifacts; returns the results.
#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn run_experiment<'py>(py: Python<'py>, config_json: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let config = parse_config(config_json)?;
    let results = py.detach(|| experiment::run_experiment(&config)).map_err(to_py)?;
    to_object(py, &results)
}

/// Runs the invariant checks; returns `(passed, report_text)`.
#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn verify(py: Python<'_>, config_json: Option<&str>) -> PyResult<(bool, String)> {
    let config = parse_config(config_json)?;
    let report = py.detach(|| experiment::verify(&config));
    Ok((report.passed(), report.to_string()))
}

#[pymodule]
#[pyo3(name = "tikreg")]
fn tikreg_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(fit_samples, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("DEFAULT_SEED", experiment::DEFAULT_SEED)?;
    Ok(())
}
