//! Python bindings: trial data, single-trial estimates, distances between
//! Beta posteriors and whole simulation runs driven by a TOML configuration.

use std::path::PathBuf;

use basket_core::estimators::{estimate as run_estimator, MethodConfigs};
use basket_core::kernel::{hellinger_beta, jsd_beta, BetaParams, RngStream};
use basket_core::mcmc::McmcConfig;
use basket_core::partition::enumerate_partitions;
use basket_core::report::{emit_results, parse_config};
use basket_core::sim::{find_scenario, run_plan, scenario_table};
use basket_core::{Error, MethodId, TrialData};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    match e {
        Error::Mcmc { .. } | Error::Simulation(_) | Error::Io { .. } | Error::Csv(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<MethodId> {
    MethodId::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown method `{name}`")))
}

fn beta(a: f64, b: f64) -> PyResult<BetaParams> {
    BetaParams::new(a, b).map_err(err)
}

/// Responder counts for one trial, one entry per cohort.
#[pyclass(name = "Trial", frozen)]
struct PyTrial {
    inner: TrialData,
}

#[pymethods]
impl PyTrial {
    #[new]
    fn new(n: Vec<u64>, r: Vec<u64>) -> PyResult<Self> {
        Ok(Self {
            inner: TrialData::from_counts(&n, &r).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> Vec<u64> {
        self.inner.n().collect()
    }

    #[getter]
    fn r(&self) -> Vec<u64> {
        self.inner.r().collect()
    }

    fn __len__(&self) -> usize {
        self.inner.k()
    }

    fn __repr__(&self) -> String {
        format!("Trial(n={:?}, r={:?})", self.n(), self.r())
    }

    /// Point estimates of every cohort's response rate.
    #[pyo3(signature = (method_name, prior_mean = 0.5, seed = 0, mcmc_iters = None, mcmc_burnin = None))]
    fn estimate(
        &self,
        method_name: &str,
        prior_mean: f64,
        seed: u64,
        mcmc_iters: Option<usize>,
        mcmc_burnin: Option<usize>,
    ) -> PyResult<Vec<f64>> {
        let m = method(method_name)?;
        let mut configs = MethodConfigs::default();
        configs.apply_prior_mean(prior_mean).map_err(err)?;
        let mut mcmc = McmcConfig::default();
        if let Some(v) = mcmc_iters {
            mcmc.n_keep = v;
        }
        if let Some(v) = mcmc_burnin {
            mcmc.n_burn = v;
        }
        mcmc.validate().map_err(err)?;
        let mut rng = RngStream::new(seed, &[m.index() as u64]);
        run_estimator(m, &self.inner, &configs, &mcmc, &mut rng)
            .map(|e| e.into_inner())
            .map_err(err)
    }
}

/// Serialized names of the eight estimators.
#[pyfunction]
fn methods() -> Vec<&'static str> {
    MethodId::ALL.iter().map(|m| m.name()).collect()
}

/// Ids of the built-in scenarios.
#[pyfunction]
fn scenario_ids() -> Vec<String> {
    scenario_table().into_iter().map(|s| s.id).collect()
}

/// True response rates of a built-in scenario.
#[pyfunction]
fn scenario_rates(id: &str) -> PyResult<Vec<f64>> {
    find_scenario(id)
        .map(|s| s.true_rates)
        .ok_or_else(|| PyValueError::new_err(format!("unknown scenario id `{id}`")))
}

#[pyfunction(name = "hellinger_beta")]
fn py_hellinger(a1: f64, b1: f64, a2: f64, b2: f64) -> PyResult<f64> {
    Ok(hellinger_beta(beta(a1, b1)?, beta(a2, b2)?))
}

/// Jensen-Shannon divergence in bits.
#[pyfunction(name = "jsd_beta")]
fn py_jsd(a1: f64, b1: f64, a2: f64, b2: f64) -> PyResult<f64> {
    jsd_beta(beta(a1, b1)?, beta(a2, b2)?).map_err(err)
}

/// Set partitions of `k` cohorts as lists of block labels.
#[pyfunction]
fn partitions(k: usize) -> PyResult<Vec<Vec<u8>>> {
    Ok(enumerate_partitions(k)
        .map_err(err)?
        .iter()
        .map(|p| p.assignment().to_vec())
        .collect())
}

/// Runs the plan described by a TOML configuration and returns one dict per
/// (scenario, method, n) cell. When `out_dir` is given the CSV tables and
/// manifest are written there as well.
#[pyfunction]
#[pyo3(signature = (config = "", out_dir = None))]
fn simulate<'py>(py: Python<'py>, config: &str, out_dir: Option<PathBuf>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = parse_config(config).map_err(err)?;
    let plan = cfg.to_plan().map_err(err)?;
    let out = py.detach(|| run_plan(&plan)).map_err(err)?;
    if let Some(dir) = out_dir {
        emit_results(&out.metrics, &cfg, &dir).map_err(err)?;
    }
    out.metrics
        .iter()
        .map(|m| {
            let d = PyDict::new(py);
            d.set_item("scenario", &m.scenario_id)?;
            d.set_item("method", m.method.name())?;
            d.set_item("n", m.n_per_cohort)?;
            d.set_item("mean_abs_bias", m.mean_abs_bias)?;
            d.set_item("mean_mse", m.mean_mse)?;
            d.set_item("shrinkage", m.shrinkage)?;
            d.set_item("mean_est", m.per_cohort.iter().map(|c| c.mean_est).collect::<Vec<_>>())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn basket(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrial>()?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_ids, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_rates, m)?)?;
    m.add_function(wrap_pyfunction!(py_hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(py_jsd, m)?)?;
    m.add_function(wrap_pyfunction!(partitions, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
