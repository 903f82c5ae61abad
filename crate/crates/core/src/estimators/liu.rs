//! Local multiple-exchangeability: borrow only within the blocks of the
//! highest-posterior partition.

use serde::{Deserialize, Serialize};

use super::in_canonical_order;
use crate::error::{Error, Result};
use crate::kernel::BetaParams;
use crate::partition::{map_partition, partition_posterior, MAX_COHORTS};
use crate::trial::{EstimateVector, TrialData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiuConfig {
    pub rate_prior: BetaParams,
    /// Model prior exponent; 0 weights every partition equally.
    pub delta: f64,
}

impl Default for LiuConfig {
    fn default() -> Self {
        Self {
            rate_prior: BetaParams::UNIFORM,
            delta: 0.0,
        }
    }
}

impl LiuConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() {
            return Err(Error::config("liu.delta", "delta must be finite"));
        }
        Ok(())
    }
}

pub fn estimate_liu_local_mem(data: &TrialData, cfg: &LiuConfig) -> Result<EstimateVector> {
    cfg.validate()?;
    if data.k() > MAX_COHORTS {
        return Err(Error::domain(format!(
            "local MEM supports at most {MAX_COHORTS} cohorts, got {}",
            data.k()
        )));
    }
    // ties in the partition posterior may legitimately split identical
    // cohorts, so tied cohorts are not forced equal here
    in_canonical_order(data, false, |data| {
        let post = partition_posterior(data, cfg.rate_prior, cfg.delta)?;
        let part = map_partition(&post)?;
        let (a, b) = (cfg.rate_prior.alpha(), cfg.rate_prior.beta());
        let totals = part.block_totals(data);
        Ok((0..data.k())
            .map(|i| {
                let (r, n) = totals[part.block_of(i)];
                (a + r as f64) / (a + b + n as f64)
            })
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::log_bb_marginal;

    #[test]
    fn two_cohort_hand_calculation() {
        let data = TrialData::from_counts(&[1, 1], &[1, 0]).unwrap();
        let est = estimate_liu_local_mem(&data, &LiuConfig::default()).unwrap();
        assert!((est[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((est[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn large_identical_cohorts_pool() {
        let u = BetaParams::UNIFORM;
        // pooled evidence beats full separation by a wide margin
        let pooled = log_bb_marginal(180, 600, u).unwrap();
        let split = 6.0 * log_bb_marginal(30, 100, u).unwrap();
        assert!(pooled > split + 5.0);

        let data = TrialData::uniform(6, 100, 30).unwrap();
        let est = estimate_liu_local_mem(&data, &LiuConfig::default()).unwrap();
        for &e in est.as_slice() {
            assert_eq!(e, 181.0 / 602.0);
        }
    }
}
