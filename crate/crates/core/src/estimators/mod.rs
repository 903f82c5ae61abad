//! The eight response-rate estimators.
//!
//! Each estimator maps a [`TrialData`] to an [`EstimateVector`]. The exact
//! ones (sample proportion, model averaging, similarity weighting, local MEM)
//! are deterministic; the hierarchical ones run a Markov chain and report the
//! posterior mean of each cohort's response rate.

mod berry;
mod chen_lee;
mod exnex;
mod fujikawa;
mod jin;
mod liu;
mod psioda;
mod sample_proportion;

use serde::{Deserialize, Serialize};

pub use berry::{estimate_berry_bhm, BerryConfig};
pub use chen_lee::{
    chen_lee_from_similarity, crp_cocluster_matrix, estimate_chen_lee_bchm, ChenLeeConfig,
    SimilarityMatrix,
};
pub use exnex::{estimate_exnex, ExScalePrior, ExnexConfig};
pub use fujikawa::{estimate_fujikawa, fujikawa_weights, FujikawaConfig};
pub use jin::{estimate_jin_cbhm, jin_squared_distances, GammaPrior, InverseGammaPrior, JinConfig};
pub use liu::{estimate_liu_local_mem, LiuConfig};
pub use psioda::{estimate_psioda_bma, PsiodaConfig};
pub use sample_proportion::estimate_sample_proportion;

use crate::error::{Error, Result};
use crate::kernel::special::binomial_logit_loglik;
use crate::kernel::{logit, BetaParams, RngStream};
use crate::mcmc::{ChainSummary, McmcConfig};
use crate::trial::{CohortData, EstimateVector, MethodId, TrialData};

/// Starting log-odds, pulled half a response toward 1/2 so it is finite.
pub(crate) fn initial_theta(c: &CohortData) -> f64 {
    let p = (c.r as f64 + 0.5) / (c.n as f64 + 1.0);
    (p / (1.0 - p)).ln()
}

pub(crate) fn theta_loglik(c: &CohortData, theta: f64) -> f64 {
    binomial_logit_loglik(c.r, c.n, theta)
}

/// The first `k` monitors of every chain model are the cohort rates.
pub(crate) fn rates_from_summary(summary: &ChainSummary, k: usize) -> Result<EstimateVector> {
    EstimateVector::new(summary.posterior_mean[..k].to_vec())
}

/// Evaluates an exact estimator on the cohorts sorted by `(n, r)` and maps
/// the result back, so that relabelling cohorts permutes the output exactly
/// (floating-point summation order no longer depends on the labels). With
/// `share_ties`, cohorts with identical counts receive bit-identical values.
pub(crate) fn in_canonical_order(
    data: &TrialData,
    share_ties: bool,
    f: impl FnOnce(&TrialData) -> Result<Vec<f64>>,
) -> Result<EstimateVector> {
    let mut order: Vec<usize> = (0..data.k()).collect();
    order.sort_by_key(|&i| (data.cohorts[i].n, data.cohorts[i].r, i));
    let sorted = data.permuted(&order);
    let mut vals = f(&sorted)?;
    if share_ties {
        for i in 1..vals.len() {
            if sorted.cohorts[i] == sorted.cohorts[i - 1] {
                vals[i] = vals[i - 1];
            }
        }
    }
    let mut out = vec![0.0; vals.len()];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = vals[pos];
    }
    EstimateVector::new(out)
}

/// Configuration of every estimator, one section per method.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfigs {
    pub berry: BerryConfig,
    pub exnex: ExnexConfig,
    pub psioda: PsiodaConfig,
    pub fujikawa: FujikawaConfig,
    pub jin: JinConfig,
    pub chen_lee: ChenLeeConfig,
    pub liu: LiuConfig,
}

impl MethodConfigs {
    pub fn validate(&self) -> Result<()> {
        self.berry.validate()?;
        self.exnex.validate()?;
        self.psioda.validate()?;
        self.fujikawa.validate()?;
        self.jin.validate()?;
        self.chen_lee.validate()?;
        self.liu.validate()
    }

    /// Re-centres every prior on `prior_mean`.
    ///
    /// Beta-prior methods get `Beta(2m, 2(1−m))`, keeping a total prior
    /// weight of two; logit-scale locations are set to `logit(m)`. Nothing
    /// else changes.
    pub fn apply_prior_mean(&mut self, prior_mean: f64) -> Result<()> {
        if !(prior_mean > 0.0 && prior_mean < 1.0) {
            return Err(Error::config(
                "prior_mean",
                format!("prior_mean must lie in (0,1), got {prior_mean}"),
            ));
        }
        let beta = BetaParams::new(2.0 * prior_mean, 2.0 * (1.0 - prior_mean))?;
        let loc = logit(prior_mean)?;
        self.psioda.rate_prior = beta;
        self.fujikawa.rate_prior = beta;
        self.liu.rate_prior = beta;
        self.berry.mu0 = loc;
        self.exnex.mu0_mean = loc;
        self.exnex.nex_mean = loc;
        self.jin.mu0 = loc;
        self.chen_lee.mu2 = loc;
        Ok(())
    }
}

/// Runs `method` on `data`. Exact methods ignore `mcmc` and `rng`.
pub fn estimate(
    method: MethodId,
    data: &TrialData,
    configs: &MethodConfigs,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
) -> Result<EstimateVector> {
    match method {
        MethodId::SampleProportion => estimate_sample_proportion(data),
        MethodId::BerryBhm => estimate_berry_bhm(data, &configs.berry, mcmc, rng),
        MethodId::Exnex => estimate_exnex(data, &configs.exnex, mcmc, rng),
        MethodId::PsiodaBma => estimate_psioda_bma(data, &configs.psioda),
        MethodId::Fujikawa => estimate_fujikawa(data, &configs.fujikawa),
        MethodId::JinCbhm => estimate_jin_cbhm(data, &configs.jin, mcmc, rng),
        MethodId::ChenLeeBchm => estimate_chen_lee_bchm(data, &configs.chen_lee, mcmc, rng),
        MethodId::LiuLocalMem => estimate_liu_local_mem(data, &configs.liu),
    }
}
