//! Python bindings: `import gksecrecy`.

use gk_secrecy::channel as ch;
use gk_secrecy::montecarlo::{self as mc, SamplingLaw};
use gk_secrecy::secrecy as sec;
use gk_secrecy::specfun::QuadratureSpec;
use gk_secrecy::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidArgument(_) | Error::Domain(_) | Error::Unsupported(_) => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Average SNR and shape parameters of one generalized-K link.
#[pyclass(name = "ChannelParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyChannelParams(ch::ChannelParams);

#[pymethods]
impl PyChannelParams {
    #[new]
    fn new(k: f64, m: u32, gamma_bar: f64) -> PyResult<Self> {
        ch::ChannelParams::new(k, m, gamma_bar).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_db(k: f64, m: u32, gamma_bar_db: f64) -> PyResult<Self> {
        ch::ChannelParams::from_db(k, m, gamma_bar_db).map(Self).map_err(to_py)
    }

    #[getter]
    fn k(&self) -> f64 {
        self.0.k()
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m()
    }

    #[getter]
    fn gamma_bar(&self) -> f64 {
        self.0.gamma_bar()
    }

    #[getter]
    fn gamma_bar_db(&self) -> f64 {
        self.0.gamma_bar_db()
    }

    #[getter]
    fn diversity_order(&self) -> f64 {
        self.0.diversity_order()
    }

    fn __repr__(&self) -> String {
        format!(
            "ChannelParams(k={}, m={}, gamma_bar={})",
            self.0.k(),
            self.0.m(),
            self.0.gamma_bar()
        )
    }
}

/// Gamma-mixture surrogate of a link.
#[pyclass(name = "MixedGammaModel", frozen)]
struct PyMixedGammaModel(ch::MixedGammaModel);

#[pymethods]
impl PyMixedGammaModel {
    #[new]
    #[pyo3(signature = (params, order = ch::DEFAULT_ORDER))]
    fn new(params: PyChannelParams, order: usize) -> PyResult<Self> {
        ch::MixedGammaModel::fit(&params.0, order).map(Self).map_err(to_py)
    }

    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    #[getter]
    fn shape(&self) -> u32 {
        self.0.shape()
    }

    /// `(a_j, zeta_j, A_j)` for every component.
    fn terms(&self) -> Vec<(f64, f64, f64)> {
        self.0.terms().iter().map(|t| (t.a, t.zeta, t.weight)).collect()
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        self.0.pdf(x).map_err(to_py)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.0.cdf(x).map_err(to_py)
    }

    fn ccdf(&self, x: f64) -> PyResult<f64> {
        self.0.ccdf(x).map_err(to_py)
    }
}

/// Confidential rate `rate_rs` and reliability threshold `mu`.
#[pyclass(name = "SecrecyConfig", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySecrecyConfig(sec::SecrecyConfig);

#[pymethods]
impl PySecrecyConfig {
    #[new]
    #[pyo3(signature = (rate_rs, mu = 0.0))]
    fn new(rate_rs: f64, mu: f64) -> PyResult<Self> {
        sec::SecrecyConfig::new(rate_rs, mu).map(Self).map_err(to_py)
    }

    #[getter]
    fn rate_rs(&self) -> f64 {
        self.0.rate_rs()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }

    /// `2^rate_rs`.
    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda()
    }

    fn __repr__(&self) -> String {
        format!("SecrecyConfig(rate_rs={}, mu={})", self.0.rate_rs(), self.0.mu())
    }
}

#[pyfunction]
fn sop_closed_form(d: &PyMixedGammaModel, e: &PyMixedGammaModel, cfg: PySecrecyConfig) -> PyResult<f64> {
    sec::sop_closed_form(&d.0, &e.0, &cfg.0).map(|s| s.value).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (d, e, cfg, rel_tol = 1e-12))]
fn sop_quadrature(d: &PyMixedGammaModel, e: &PyMixedGammaModel, cfg: PySecrecyConfig, rel_tol: f64) -> PyResult<f64> {
    sec::sop_quadrature(&d.0, &e.0, &cfg.0, &QuadratureSpec::relative(rel_tol))
        .map(|s| s.value)
        .map_err(to_py)
}

#[pyfunction]
fn sop_conventional(d: &PyMixedGammaModel, e: &PyMixedGammaModel, rate_rs: f64) -> PyResult<f64> {
    sec::sop_conventional(&d.0, &e.0, rate_rs)
        .map(|s| s.value)
        .map_err(to_py)
}

/// High-SNR asymptote; quadrature is used when the diversity order is not an integer.
#[pyfunction]
fn asop(d: PyChannelParams, e: &PyMixedGammaModel, cfg: PySecrecyConfig) -> PyResult<f64> {
    let result = if d.0.diversity_order().fract() == 0.0 {
        sec::asop_closed_form(&d.0, &e.0, &cfg.0)
    } else {
        sec::asop_quadrature(&d.0, &e.0, &cfg.0, &QuadratureSpec::relative(1e-12))
    };
    result.map(|s| s.value).map_err(to_py)
}

#[pyfunction]
fn asymptote_report<'py>(
    py: Python<'py>,
    d: PyChannelParams,
    e: &PyMixedGammaModel,
    cfg: PySecrecyConfig,
) -> PyResult<Bound<'py, PyDict>> {
    let report = sec::asymptote_report(&d.0, &e.0, &cfg.0).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("diversity_order", report.diversity_order)?;
    out.set_item("coefficient", report.coefficient)?;
    out.set_item("array_gain", report.array_gain)?;
    Ok(out)
}

/// Conditional SOP by simulation; returns `(value, stderr)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (d, e, cfg, samples = mc::DEFAULT_SAMPLES, seed = 1, workers = 1, law = "exact_gk"))]
fn mc_sop(
    py: Python<'_>,
    d: PyChannelParams,
    e: PyChannelParams,
    cfg: PySecrecyConfig,
    samples: u64,
    seed: u64,
    workers: usize,
    law: &str,
) -> PyResult<(f64, f64)> {
    let law = match law {
        "exact_gk" => SamplingLaw::ExactGk,
        "surrogate_mixture" => SamplingLaw::SurrogateMixture,
        other => return Err(PyValueError::new_err(format!("unknown law '{other}'"))),
    };
    let config = mc::McConfig::new(samples, seed)
        .map_err(to_py)?
        .with_workers(workers)
        .with_law(law);
    let est = py.detach(|| mc::mc_sop(&d.0, &e.0, &cfg.0, &config)).map_err(to_py)?;
    Ok((est.value, est.stderr))
}

#[pymodule]
fn gksecrecy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelParams>()?;
    m.add_class::<PyMixedGammaModel>()?;
    m.add_class::<PySecrecyConfig>()?;
    m.add_function(wrap_pyfunction!(sop_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(sop_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(sop_conventional, m)?)?;
    m.add_function(wrap_pyfunction!(asop, m)?)?;
    m.add_function(wrap_pyfunction!(asymptote_report, m)?)?;
    m.add_function(wrap_pyfunction!(mc_sop, m)?)?;
    m.add_function(wrap_pyfunction!(db_to_linear, m)?)?;
    Ok(())
}

#[pyfunction]
fn db_to_linear(db: f64) -> f64 {
    ch::db_to_linear(db)
}
