//! Monte-Carlo comparison of estimators on simulated trials.
//!
//! Every (scenario, cohort size, replication) triple draws one trial from its
//! own random stream and feeds that same trial to every requested method, so
//! method comparisons are paired. Each method run gets a stream of its own.
//! Stream paths depend only on the scenario id, the cohort size, the
//! replication index and the method, so results are bitwise identical for
//! any worker count or scenario subset.

mod metrics;
mod scenarios;

use std::hash::{Hash, Hasher};

use rayon::prelude::*;

pub use metrics::{compute_metrics, CohortMetrics, MetricsRecord, ReplicationResult};
pub use scenarios::{find_scenario, scenario_table};

use crate::error::{Error, Result};
use crate::estimators::{estimate, MethodConfigs};
use crate::kernel::dist::binomial;
use crate::kernel::RngStream;
use crate::mcmc::McmcConfig;
use crate::trial::{CohortData, MethodId, Scenario, TrialData};

const DATA_STREAM: u64 = 0;
const METHOD_STREAM: u64 = 1;

/// Largest tolerated fraction of failed replications per method.
pub const MAX_FAILURE_RATE: f64 = 0.01;

pub const DEFAULT_SAMPLE_SIZES: [u64; 4] = [10, 20, 30, 100];

#[derive(Debug, Clone, PartialEq)]
pub struct SimPlan {
    pub scenarios: Vec<Scenario>,
    pub sample_sizes: Vec<u64>,
    pub methods: Vec<MethodId>,
    pub n_reps: usize,
    pub master_seed: u64,
    /// Prior centre already folded into `configs`; kept for provenance.
    pub prior_mean: f64,
    pub configs: MethodConfigs,
    pub mcmc: McmcConfig,
    pub workers: usize,
}

impl Default for SimPlan {
    fn default() -> Self {
        Self {
            scenarios: scenario_table(),
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            methods: MethodId::ALL.to_vec(),
            n_reps: 1000,
            master_seed: 20240601,
            prior_mean: 0.5,
            configs: MethodConfigs::default(),
            mcmc: McmcConfig::default(),
            workers: 1,
        }
    }
}

impl SimPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 2 {
            return Err(Error::config("n_reps", "n_reps must be at least 2"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(Error::config("sample_sizes", "sample sizes must be positive"));
        }
        if self.scenarios.is_empty() {
            return Err(Error::config("scenarios", "no scenarios selected"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "no methods selected"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "workers must be at least 1"));
        }
        self.configs.validate()?;
        self.mcmc.validate()
    }
}

/// Binomial draw per cohort, all cohorts of size `n_per_cohort`.
pub fn generate_trial(scenario: &Scenario, n_per_cohort: u64, rng: &mut RngStream) -> Result<TrialData> {
    if n_per_cohort == 0 {
        return Err(Error::domain("n_per_cohort must be at least 1"));
    }
    TrialData::new(
        scenario
            .true_rates
            .iter()
            .map(|&p| CohortData::new(n_per_cohort, binomial(rng, n_per_cohort, p)))
            .collect(),
    )
}

/// FNV-1a, so stream paths do not depend on std's unstable hasher.
fn id_key(id: &str) -> u64 {
    id.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn data_stream(seed: u64, scenario_id: &str, n: u64, rep: usize) -> RngStream {
    RngStream::new(seed, &[DATA_STREAM, id_key(scenario_id), n, rep as u64])
}

pub fn method_stream(seed: u64, scenario_id: &str, n: u64, rep: usize, method: MethodId) -> RngStream {
    RngStream::new(
        seed,
        &[METHOD_STREAM, id_key(scenario_id), n, rep as u64, method.index() as u64],
    )
}

fn data_hash(data: &TrialData) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    data.hash(&mut h);
    h.finish()
}

/// One simulated trial and every method's outcome on it.
struct RepOutcome {
    hash: u64,
    per_method: Vec<Result<Vec<f64>, String>>,
}

#[derive(Debug, Clone)]
pub struct PlanOutput {
    /// Ordered by scenario id, method, then cohort size.
    pub metrics: Vec<MetricsRecord>,
    /// Same order as `metrics`.
    pub replications: Vec<ReplicationResult>,
    /// Per (scenario, n) cell in plan order, the hash of each generated trial.
    pub data_hashes: Vec<((String, u64), Vec<u64>)>,
}

pub fn run_plan(plan: &SimPlan) -> Result<PlanOutput> {
    plan.validate()?;
    let cells: Vec<(usize, u64)> = plan
        .scenarios
        .iter()
        .enumerate()
        .flat_map(|(s, _)| plan.sample_sizes.iter().map(move |&n| (s, n)))
        .collect();
    let units: Vec<(usize, u64, usize)> = cells
        .iter()
        .flat_map(|&(s, n)| (0..plan.n_reps).map(move |rep| (s, n, rep)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::Simulation(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<RepOutcome>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(s, n, rep)| run_unit(plan, &plan.scenarios[s], n, rep))
            .collect()
    });

    let mut outcomes = outcomes.into_iter();
    let mut replications = Vec::new();
    let mut data_hashes = Vec::new();
    let mut failures = vec![0usize; plan.methods.len()];
    for &(s, n) in &cells {
        let scenario = &plan.scenarios[s];
        let mut cell: Vec<ReplicationResult> = plan
            .methods
            .iter()
            .map(|&method| ReplicationResult {
                scenario_id: scenario.id.clone(),
                method,
                n_per_cohort: n,
                reps: Vec::new(),
                estimates: Vec::new(),
                failed_reps: Vec::new(),
            })
            .collect();
        let mut hashes = Vec::with_capacity(plan.n_reps);
        for rep in 0..plan.n_reps {
            let outcome = outcomes.next().expect("one outcome per unit")?;
            hashes.push(outcome.hash);
            for (m, res) in outcome.per_method.into_iter().enumerate() {
                match res {
                    Ok(est) => {
                        cell[m].reps.push(rep);
                        cell[m].estimates.push(est);
                    }
                    Err(msg) => {
                        log::warn!(
                            "{} failed on scenario {} n={n} rep {rep}: {msg}",
                            plan.methods[m],
                            scenario.id
                        );
                        failures[m] += 1;
                        cell[m].failed_reps.push(rep);
                    }
                }
            }
        }
        data_hashes.push(((scenario.id.clone(), n), hashes));
        replications.extend(cell);
    }

    let total = cells.len() * plan.n_reps;
    for (m, &f) in failures.iter().enumerate() {
        if f > 0 {
            log::warn!("{}: {f} of {total} replications failed and were excluded", plan.methods[m]);
        }
        if f as f64 > MAX_FAILURE_RATE * total as f64 {
            return Err(Error::Simulation(format!(
                "{} failed on {f} of {total} replications (limit {}%)",
                plan.methods[m],
                MAX_FAILURE_RATE * 100.0
            )));
        }
    }

    replications.sort_by(|a, b| {
        (&a.scenario_id, a.method.index(), a.n_per_cohort).cmp(&(&b.scenario_id, b.method.index(), b.n_per_cohort))
    });
    let metrics = replications
        .iter()
        .map(|r| {
            let scenario = plan
                .scenarios
                .iter()
                .find(|s| s.id == r.scenario_id)
                .expect("scenario of a result");
            compute_metrics(r, scenario)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlanOutput {
        metrics,
        replications,
        data_hashes,
    })
}

fn run_unit(plan: &SimPlan, scenario: &Scenario, n: u64, rep: usize) -> Result<RepOutcome> {
    let seed = plan.master_seed;
    let data = generate_trial(scenario, n, &mut data_stream(seed, &scenario.id, n, rep))?;
    let per_method = plan
        .methods
        .iter()
        .map(|&method| {
            let mut rng = method_stream(seed, &scenario.id, n, rep, method);
            estimate(method, &data, &plan.configs, &plan.mcmc, &mut rng)
                .map(|e| e.into_inner())
                .map_err(|e| e.to_string())
        })
        .collect();
    Ok(RepOutcome {
        hash: data_hash(&data),
        per_method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_rates() {
        let mut rng = RngStream::new(1, &[]);
        let zero = Scenario::new("z", vec![0.0; 6]).unwrap();
        let one = Scenario::new("o", vec![1.0; 6]).unwrap();
        assert!(generate_trial(&zero, 10, &mut rng).unwrap().r().all(|r| r == 0));
        assert!(generate_trial(&one, 10, &mut rng).unwrap().r().all(|r| r == 10));
        assert!(generate_trial(&one, 0, &mut rng).is_err());
    }

    #[test]
    fn binomial_mean() {
        let sc = Scenario::new("p", vec![0.3]).unwrap();
        let mut rng = RngStream::new(2, &[]);
        let total: u64 = (0..10_000)
            .map(|_| {
                let c = sc.true_rates.iter().map(|&p| binomial(&mut rng, 100, p)).sum::<u64>();
                c
            })
            .sum();
        let mean = total as f64 / 10_000.0;
        assert!((mean - 30.0).abs() < 0.3, "{mean}");
    }

    #[test]
    fn stream_keys_are_stable() {
        assert_eq!(id_key("1.A.1"), id_key("1.A.1"));
        assert_ne!(id_key("1.A.1"), id_key("1.A.2"));
        let a = data_stream(5, "2.B.2", 20, 3).key();
        assert_eq!(a, data_stream(5, "2.B.2", 20, 3).key());
        assert_ne!(a, data_stream(5, "2.B.2", 20, 4).key());
        assert_ne!(a, method_stream(5, "2.B.2", 20, 3, MethodId::BerryBhm).key());
    }

    #[test]
    fn rejects_bad_plans() {
        let plan = SimPlan {
            n_reps: 1,
            ..SimPlan::default()
        };
        assert!(run_plan(&plan).is_err());
        let plan = SimPlan {
            sample_sizes: vec![10, 0],
            ..SimPlan::default()
        };
        assert!(plan.validate().is_err());
    }
}
