//! Bayesian model averaging over all partitions of the cohorts.

use serde::{Deserialize, Serialize};

use super::in_canonical_order;
use crate::error::{Error, Result};
use crate::kernel::BetaParams;
use crate::partition::{partition_posterior, MAX_COHORTS};
use crate::trial::{EstimateVector, TrialData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiodaConfig {
    pub rate_prior: BetaParams,
    /// Model prior ∝ (number of blocks)^exponent.
    pub model_prior_exponent: f64,
}

impl Default for PsiodaConfig {
    fn default() -> Self {
        Self {
            rate_prior: BetaParams::UNIFORM,
            model_prior_exponent: 1.0,
        }
    }
}

impl PsiodaConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.model_prior_exponent.is_finite() {
            return Err(Error::config(
                "psioda.model_prior_exponent",
                "model_prior_exponent must be finite",
            ));
        }
        Ok(())
    }
}

/// Posterior-model-probability weighted average of the block posterior means.
pub fn estimate_psioda_bma(data: &TrialData, cfg: &PsiodaConfig) -> Result<EstimateVector> {
    cfg.validate()?;
    if data.k() > MAX_COHORTS {
        return Err(Error::domain(format!(
            "model averaging supports at most {MAX_COHORTS} cohorts, got {}",
            data.k()
        )));
    }
    in_canonical_order(data, true, |data| {
        let post = partition_posterior(data, cfg.rate_prior, cfg.model_prior_exponent)?;
        let (a, b) = (cfg.rate_prior.alpha(), cfg.rate_prior.beta());
        let mut est = vec![0.0; data.k()];
        for (part, &w) in post.partitions.iter().zip(&post.posterior_prob) {
            let block_means: Vec<f64> = part
                .block_totals(data)
                .into_iter()
                .map(|(r, n)| (a + r as f64) / (a + b + n as f64))
                .collect();
            for (i, e) in est.iter_mut().enumerate() {
                *e += w * block_means[part.block_of(i)];
            }
        }
        Ok(est)
    })
}
