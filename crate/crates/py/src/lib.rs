//! Python bindings. Systems cross the boundary as `ParamSystem` objects or
//! model-file JSON; reports come back as JSON strings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pars_reduce::catalog;
use pars_reduce::io::{self, ModelFile};
use pars_reduce::psys::{self, ParamStateSpace, TimeDomain};
use pars_reduce::reduce::ReductionConfig;
use pars_reduce::Error;
use pars_reduce_cli::{run_baseline, run_reduce, BaselineConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parse(_) | Error::Config(_) | Error::ShapeMismatch { .. } | Error::VarCountMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Parameter-dependent state-space system with polynomial matrices.
#[pyclass(name = "ParamSystem", module = "pars_reduce_py", from_py_object)]
#[derive(Clone)]
pub struct PySystem {
    inner: ParamStateSpace,
}

#[pymethods]
impl PySystem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PySystem { inner: io::parse_model(text).map_err(py_err)? })
    }

    #[staticmethod]
    fn catalog(name: &str) -> PyResult<Self> {
        catalog::by_name(name)
            .map(|inner| PySystem { inner })
            .ok_or_else(|| PyValueError::new_err(format!("unknown system `{name}`; known: {:?}", catalog::NAMES)))
    }

    fn to_json(&self) -> String {
        ModelFile::from_system(&self.inner).to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn o(&self) -> usize {
        self.inner.o()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.nvars()
    }

    #[getter]
    fn discrete(&self) -> bool {
        self.inner.time_domain == TimeDomain::Discrete
    }

    /// `(A, B, C, D)` as nested lists at `alpha`.
    #[allow(clippy::type_complexity)]
    fn evaluate(&self, alpha: Vec<f64>) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let f = self.inner.evaluate(&alpha).map_err(py_err)?;
        Ok((rows(&f.a), rows(&f.b), rows(&f.c), rows(&f.d)))
    }

    #[pyo3(signature = (alpha, tol = 1e-9))]
    fn hinf_norm(&self, alpha: Vec<f64>, tol: f64) -> PyResult<f64> {
        self.inner.evaluate(&alpha).and_then(|f| f.hinf_norm(tol)).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let td = if self.discrete() { "discrete" } else { "continuous" };
        format!("ParamSystem({td}, n={}, m={}, o={}, p={})", self.n(), self.m(), self.o(), self.p())
    }
}

/// `(max_error, argmax)` of `||G(alpha) - G'(alpha[:p'])||_inf` over the grid.
#[pyfunction]
#[pyo3(signature = (original, reduced, grid = psys::DEFAULT_GRID))]
fn sampled_error(original: &PySystem, reduced: &PySystem, grid: usize) -> PyResult<(f64, Vec<f64>)> {
    let s = psys::sampled_sup_error(&original.inner, &reduced.inner, reduced.inner.nvars(), grid).map_err(py_err)?;
    Ok((s.max_error, s.argmax))
}

/// Runs the SOS reduction; returns the run report as JSON.
#[pyfunction]
fn reduce(py: Python<'_>, system: &PySystem, config_json: &str) -> PyResult<String> {
    let cfg: ReductionConfig = serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let g = system.inner.clone();
    let report = py.detach(move || run_reduce(&g, &cfg)).map_err(py_err)?;
    Ok(report.to_json())
}

/// Structured balanced truncation keeping `n_prime` states and `p_prime` channels.
#[pyfunction]
#[pyo3(signature = (system, n_prime, p_prime, grid = psys::DEFAULT_GRID))]
fn baseline(py: Python<'_>, system: &PySystem, n_prime: usize, p_prime: usize, grid: usize) -> PyResult<String> {
    let cfg = BaselineConfig {
        n_prime: Some(n_prime),
        p_prime: Some(p_prime),
        grid_per_dim: Some(grid),
        ..Default::default()
    };
    let g = system.inner.clone();
    let report = py.detach(move || run_baseline(&g, &cfg)).map_err(py_err)?;
    Ok(report.to_json())
}

/// Reduced model embedded in a run report.
#[pyfunction]
fn reduced_model(report_json: &str) -> PyResult<PySystem> {
    let v: serde_json::Value = serde_json::from_str(report_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let text = v.get("reducedModel").ok_or_else(|| PyValueError::new_err("report has no reducedModel"))?.to_string();
    PySystem::from_json(&text)
}

#[pymodule]
pub fn pars_reduce_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(sampled_error, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_model, m)?)?;
    m.add("CATALOG", catalog::NAMES.to_vec())?;
    Ok(())
}
