use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::{min_max, MethodId, Scenario};

/// Estimates of one method on one (scenario, cohort size) cell, one row per
/// successful replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub scenario_id: String,
    pub method: MethodId,
    pub n_per_cohort: u64,
    /// Replication indices of the rows in `estimates`.
    pub reps: Vec<usize>,
    pub estimates: Vec<Vec<f64>>,
    /// Replications on which the estimator returned an error.
    pub failed_reps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMetrics {
    pub true_p: f64,
    pub mean_est: f64,
    pub bias: f64,
    /// Sample variance over replications (n − 1 denominator).
    pub variance: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario_id: String,
    pub method: MethodId,
    pub n_per_cohort: u64,
    pub mean_abs_bias: f64,
    pub mean_mse: f64,
    /// Absent when all true rates are equal.
    pub shrinkage: Option<f64>,
    pub per_cohort: Vec<CohortMetrics>,
}

pub fn compute_metrics(results: &ReplicationResult, scenario: &Scenario) -> Result<MetricsRecord> {
    let reps = results.estimates.len();
    if reps < 2 {
        return Err(Error::Simulation(format!(
            "{} on {} (n={}): metrics need at least 2 replications, got {reps}",
            results.method, scenario.id, results.n_per_cohort
        )));
    }
    let k = scenario.k();
    if let Some(row) = results.estimates.iter().find(|r| r.len() != k) {
        return Err(Error::Simulation(format!(
            "estimate row has {} cohorts, scenario {} has {k}",
            row.len(),
            scenario.id
        )));
    }
    let per_cohort: Vec<CohortMetrics> = (0..k)
        .map(|i| {
            let mean = results.estimates.iter().map(|r| r[i]).sum::<f64>() / reps as f64;
            let variance = results
                .estimates
                .iter()
                .map(|r| (r[i] - mean).powi(2))
                .sum::<f64>()
                / (reps - 1) as f64;
            let bias = mean - scenario.true_rates[i];
            CohortMetrics {
                true_p: scenario.true_rates[i],
                mean_est: mean,
                bias,
                variance,
                mse: bias * bias + variance,
            }
        })
        .collect();
    let mean_abs_bias = per_cohort.iter().map(|c| c.bias.abs()).sum::<f64>() / k as f64;
    let mean_mse = per_cohort.iter().map(|c| c.mse).sum::<f64>() / k as f64;
    let (plo, phi) = min_max(&scenario.true_rates);
    let shrinkage = (phi > plo).then(|| {
        let means: Vec<f64> = per_cohort.iter().map(|c| c.mean_est).collect();
        let (elo, ehi) = min_max(&means);
        1.0 - (ehi - elo) / (phi - plo)
    });
    Ok(MetricsRecord {
        scenario_id: scenario.id.clone(),
        method: results.method,
        n_per_cohort: results.n_per_cohort,
        mean_abs_bias,
        mean_mse,
        shrinkage,
        per_cohort,
    })
}
