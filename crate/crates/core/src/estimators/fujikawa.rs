//! Similarity-weighted pooling of standalone Beta posteriors.
//!
//! Each cohort's posterior `Beta(a + r, b + n - r)` is compared with every
//! other cohort's by Jensen–Shannon divergence. Similarity `1 - JSD` above
//! `tau` yields weight `(1 - JSD)^epsilon`; the borrowed posterior for cohort
//! `i` sums the weighted shapes of all cohorts (own weight 1).

use serde::{Deserialize, Serialize};

use super::in_canonical_order;
use crate::error::{Error, Result};
use crate::kernel::{jsd_beta, BetaParams};
use crate::trial::{validate_trial, EstimateVector, TrialData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FujikawaConfig {
    pub rate_prior: BetaParams,
    pub tau: f64,
    pub epsilon: f64,
}

impl Default for FujikawaConfig {
    fn default() -> Self {
        Self {
            rate_prior: BetaParams::UNIFORM,
            tau: 0.5,
            epsilon: 2.0,
        }
    }
}

impl FujikawaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config("fujikawa.tau", "tau must lie in [0,1]"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("fujikawa.epsilon", "epsilon must be >= 0"));
        }
        Ok(())
    }
}

/// Pairwise borrowing weights; row `i` holds the weights used for cohort `i`.
pub fn fujikawa_weights(data: &TrialData, cfg: &FujikawaConfig) -> Result<Vec<Vec<f64>>> {
    let k = data.k();
    let post: Vec<BetaParams> = data
        .cohorts
        .iter()
        .map(|c| cfg.rate_prior.posterior(c.r, c.n))
        .collect();
    let mut w = vec![vec![0.0; k]; k];
    for i in 0..k {
        w[i][i] = 1.0;
        for j in (i + 1)..k {
            let sim = 1.0 - jsd_beta(post[i], post[j])?;
            let wij = if sim > cfg.tau { sim.powf(cfg.epsilon) } else { 0.0 };
            w[i][j] = wij;
            w[j][i] = wij;
        }
    }
    Ok(w)
}

pub fn estimate_fujikawa(data: &TrialData, cfg: &FujikawaConfig) -> Result<EstimateVector> {
    cfg.validate()?;
    let data = validate_trial(data.clone())?;
    in_canonical_order(&data, true, |data| {
        let w = fujikawa_weights(data, cfg)?;
        let (a, b) = (cfg.rate_prior.alpha(), cfg.rate_prior.beta());
        Ok(w.iter()
            .map(|row| {
                let (mut sa, mut sb) = (0.0, 0.0);
                for (wij, c) in row.iter().zip(&data.cohorts) {
                    sa += wij * (a + c.r as f64);
                    sb += wij * (b + c.failures() as f64);
                }
                sa / (sa + sb)
            })
            .collect())
    })
}
