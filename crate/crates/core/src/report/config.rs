//! Run configuration files.
//!
//! A configuration is a TOML document. Top-level keys describe the plan;
//! `[mcmc]` and one section per method override chain settings and estimator
//! hyperparameters. Resolution applies defaults, then re-centres priors on
//! `prior_mean`, then applies whatever the document sets explicitly, so an
//! explicit hyperparameter always wins over the prior-mean adjustment.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::estimators::MethodConfigs;
use crate::mcmc::McmcConfig;
use crate::sim::{find_scenario, scenario_table, SimPlan};
use crate::trial::MethodId;

/// Method sections recognised in a configuration document.
const METHOD_SECTIONS: [&str; 7] = ["berry", "exnex", "psioda", "fujikawa", "jin", "chen_lee", "liu"];

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanKeys {
    seed: Option<u64>,
    n_reps: Option<usize>,
    prior_mean: Option<f64>,
    scenarios: Option<Vec<String>>,
    sample_sizes: Option<Vec<u64>>,
    methods: Option<Vec<MethodId>>,
    workers: Option<usize>,
    out_dir: Option<PathBuf>,
    mcmc: Option<Table>,
    berry: Option<Table>,
    exnex: Option<Table>,
    psioda: Option<Table>,
    fujikawa: Option<Table>,
    jin: Option<Table>,
    chen_lee: Option<Table>,
    liu: Option<Table>,
}

/// Fully resolved configuration; serializing it gives a document that
/// parses back to the same value. `workers` is left out of the serialized
/// form because it never changes results, which keeps every output file
/// identical across worker counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub n_reps: usize,
    pub prior_mean: f64,
    pub scenarios: Vec<String>,
    pub sample_sizes: Vec<u64>,
    pub methods: Vec<MethodId>,
    #[serde(skip_serializing)]
    pub workers: usize,
    pub out_dir: PathBuf,
    pub mcmc: McmcConfig,
    #[serde(flatten)]
    pub configs: MethodConfigs,
}

impl Default for RunConfig {
    fn default() -> Self {
        let plan = SimPlan::default();
        Self {
            seed: plan.master_seed,
            n_reps: plan.n_reps,
            prior_mean: plan.prior_mean,
            scenarios: scenario_table().into_iter().map(|s| s.id).collect(),
            sample_sizes: plan.sample_sizes,
            methods: plan.methods,
            workers: plan.workers,
            out_dir: PathBuf::from("results"),
            mcmc: plan.mcmc,
            configs: plan.configs,
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::config(path, message)
}

fn typed<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner.clone(),
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{inner}"),
        };
        config_err(&path, e.into_inner().message().to_string())
    })
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn overlay<T: Serialize + DeserializeOwned>(base: &T, over: Option<Table>, section: &str) -> Result<T> {
    let Some(over) = over else {
        return typed(
            Value::try_from(base).map_err(|e| config_err(section, e.to_string()))?,
            section,
        );
    };
    let mut table = match Value::try_from(base).map_err(|e| config_err(section, e.to_string()))? {
        Value::Table(t) => t,
        _ => unreachable!("configs serialize as tables"),
    };
    merge(&mut table, over);
    typed(Value::Table(table), section)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_err("<document>", e.message().to_string()))?;
    let keys: PlanKeys = typed(Value::Table(doc), "")?;
    resolve(keys)
}

impl RunConfig {
    /// Re-centres priors on a new prior mean. Only the prior-mean-dependent
    /// locations change; other explicit settings are kept.
    pub fn set_prior_mean(&mut self, prior_mean: f64) -> Result<()> {
        self.configs.apply_prior_mean(prior_mean)?;
        self.prior_mean = prior_mean;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 2 {
            return Err(config_err("n_reps", "n_reps must be at least 2"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(config_err("seed", "seed must be below 2^63"));
        }
        if self.workers == 0 {
            return Err(config_err("workers", "workers must be at least 1"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(config_err("sample_sizes", "sample sizes must be positive"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods", "at least one method is required"));
        }
        if self.scenarios.is_empty() {
            return Err(config_err("scenarios", "at least one scenario is required"));
        }
        for id in &self.scenarios {
            if find_scenario(id).is_none() {
                return Err(config_err("scenarios", format!("unknown scenario id `{id}`")));
            }
        }
        if !(self.prior_mean > 0.0 && self.prior_mean < 1.0) {
            return Err(config_err("prior_mean", "prior_mean must lie in (0,1)"));
        }
        self.mcmc.validate()?;
        self.configs.validate()
    }

    pub fn to_plan(&self) -> Result<SimPlan> {
        self.validate()?;
        Ok(SimPlan {
            scenarios: self
                .scenarios
                .iter()
                .map(|id| find_scenario(id).expect("validated id"))
                .collect(),
            sample_sizes: self.sample_sizes.clone(),
            methods: self.methods.clone(),
            n_reps: self.n_reps,
            master_seed: self.seed,
            prior_mean: self.prior_mean,
            configs: self.configs.clone(),
            mcmc: self.mcmc.clone(),
            workers: self.workers,
        })
    }

    /// The resolved configuration as a TOML document.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e.to_string()))
    }
}

fn resolve(keys: PlanKeys) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(v) = keys.seed {
        cfg.seed = v;
    }
    if let Some(v) = keys.n_reps {
        cfg.n_reps = v;
    }
    if let Some(v) = keys.scenarios {
        cfg.scenarios = v;
    }
    if let Some(v) = keys.sample_sizes {
        cfg.sample_sizes = v;
    }
    if let Some(v) = keys.methods {
        cfg.methods = v;
    }
    if let Some(v) = keys.workers {
        cfg.workers = v;
    }
    if let Some(v) = keys.out_dir {
        cfg.out_dir = v;
    }
    if let Some(pm) = keys.prior_mean {
        cfg.set_prior_mean(pm)?;
    }
    cfg.mcmc = overlay(&cfg.mcmc, keys.mcmc, "mcmc")?;
    let sections = [keys.berry, keys.exnex, keys.psioda, keys.fujikawa, keys.jin, keys.chen_lee, keys.liu];
    let mut merged = match Value::try_from(&cfg.configs).map_err(|e| config_err("<document>", e.to_string()))? {
        Value::Table(t) => t,
        _ => unreachable!("configs serialize as tables"),
    };
    for (name, over) in METHOD_SECTIONS.iter().zip(sections) {
        if let Some(over) = over {
            let mut wrapped = Table::new();
            wrapped.insert((*name).to_string(), Value::Table(over));
            merge(&mut merged, wrapped);
        }
    }
    cfg.configs = typed(Value::Table(merged), "")?;
    cfg.validate()?;
    Ok(cfg)
}
