//! Exchangeable hierarchical model on the log-odds scale.
//!
//! θ_i ~ N(μ, σ²), μ ~ N(μ₀, σ₀²), σ² ~ IG(λ₁, λ₂), r_i ~ Bin(n_i, expit θ_i).
//! Each sweep updates θ_i by random-walk Metropolis, μ and σ² by their
//! conjugate conditionals, then applies a joint shift of (θ, μ) and a joint
//! rescaling of (θ - μ, σ). The last two keep the chain moving when σ² is
//! pulled toward zero by the near-improper variance prior.

use serde::{Deserialize, Serialize};

use super::{initial_theta, rates_from_summary, theta_loglik};
use crate::error::{Error, Result};
use crate::kernel::dist::{inverse_gamma, ln_inverse_gamma_kernel, ln_normal_pdf, normal};
use crate::kernel::{expit, RngStream};
use crate::mcmc::{
    inverse_gamma_posterior, normal_mean_posterior, run_chain, ChainModel, McmcConfig, Proposals,
    StepFailure,
};
use crate::trial::{validate_trial, EstimateVector, TrialData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerryConfig {
    pub mu0: f64,
    pub sigma0_sq: f64,
    /// Inverse-gamma shape of σ².
    pub lambda1: f64,
    /// Inverse-gamma scale of σ².
    pub lambda2: f64,
}

impl Default for BerryConfig {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            sigma0_sq: 100.0,
            lambda1: 0.0005,
            lambda2: 0.00005,
        }
    }
}

impl BerryConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("berry.sigma0_sq", self.sigma0_sq),
            ("berry.lambda1", self.lambda1),
            ("berry.lambda2", self.lambda2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !self.mu0.is_finite() {
            return Err(Error::config("berry.mu0", "must be finite"));
        }
        Ok(())
    }
}

pub(crate) struct BerryModel<'a> {
    pub data: &'a TrialData,
    pub cfg: &'a BerryConfig,
}

#[derive(Debug, Clone)]
pub(crate) struct BerryState {
    theta: Vec<f64>,
    mu: f64,
    sigma_sq: f64,
}

impl ChainModel for BerryModel<'_> {
    type State = BerryState;

    fn initial_state(&self) -> BerryState {
        let theta: Vec<f64> = self.data.cohorts.iter().map(initial_theta).collect();
        let mu = theta.iter().sum::<f64>() / theta.len() as f64;
        let sigma_sq = if self.cfg.lambda1 > 1.0 {
            self.cfg.lambda2 / (self.cfg.lambda1 - 1.0)
        } else {
            1.0
        };
        BerryState { theta, mu, sigma_sq }
    }

    fn initial_scales(&self) -> Vec<f64> {
        vec![1.0; self.data.k() + 2]
    }

    fn sweep(
        &self,
        s: &mut BerryState,
        p: &mut Proposals,
        rng: &mut RngStream,
    ) -> Result<(), StepFailure> {
        let k = self.data.k();
        let cfg = self.cfg;
        for (i, c) in self.data.cohorts.iter().enumerate() {
            let (mu, var) = (s.mu, s.sigma_sq);
            s.theta[i] = p.step(i, "theta", s.theta[i], |t| {
                theta_loglik(c, t) - 0.5 * (t - mu) * (t - mu) / var
            }, rng)?;
        }

        let (m, v) = normal_mean_posterior(s.theta.iter().sum(), k, s.sigma_sq, cfg.mu0, cfg.sigma0_sq);
        s.mu = normal(rng, m, v);

        let ss: f64 = s.theta.iter().map(|t| (t - s.mu).powi(2)).sum();
        let (a, b) = inverse_gamma_posterior(ss, k, cfg.lambda1, cfg.lambda2);
        s.sigma_sq = inverse_gamma(rng, a, b);
        if !(s.sigma_sq > 0.0 && s.sigma_sq.is_finite()) {
            return Err(StepFailure::new("sigma_sq", format!("drew {}", s.sigma_sq)));
        }

        // shift θ and μ together
        let base: f64 = self.loglik(&s.theta);
        let delta = p.offset_move(k, |d| {
            let shifted: f64 = self
                .data
                .cohorts
                .iter()
                .zip(&s.theta)
                .map(|(c, t)| theta_loglik(c, t + d))
                .sum();
            shifted - base + ln_normal_pdf(s.mu + d, cfg.mu0, cfg.sigma0_sq)
                - ln_normal_pdf(s.mu, cfg.mu0, cfg.sigma0_sq)
        }, rng);
        if delta != 0.0 {
            s.theta.iter_mut().for_each(|t| *t += delta);
            s.mu += delta;
        }

        // rescale deviations from μ; σ² scales by c²
        let base: f64 = self.loglik(&s.theta);
        let log_c = p.offset_move(k + 1, |e| {
            let c = e.exp();
            let scaled: f64 = self
                .data
                .cohorts
                .iter()
                .zip(&s.theta)
                .map(|(coh, t)| theta_loglik(coh, s.mu + c * (t - s.mu)))
                .sum();
            scaled - base + ln_inverse_gamma_kernel(c * c * s.sigma_sq, cfg.lambda1, cfg.lambda2)
                - ln_inverse_gamma_kernel(s.sigma_sq, cfg.lambda1, cfg.lambda2)
                + 2.0 * e
        }, rng);
        if log_c != 0.0 {
            let c = log_c.exp();
            let mu = s.mu;
            s.theta.iter_mut().for_each(|t| *t = mu + c * (*t - mu));
            s.sigma_sq *= c * c;
        }
        Ok(())
    }

    fn monitor_names(&self) -> Vec<String> {
        monitor_names(self.data.k())
    }

    fn monitor(&self, s: &BerryState, out: &mut [f64]) {
        let k = s.theta.len();
        for (i, t) in s.theta.iter().enumerate() {
            out[i] = expit(*t);
            out[k + i] = *t;
        }
        out[2 * k] = s.mu;
        out[2 * k + 1] = s.sigma_sq;
    }
}

impl BerryModel<'_> {
    fn loglik(&self, theta: &[f64]) -> f64 {
        self.data
            .cohorts
            .iter()
            .zip(theta)
            .map(|(c, t)| theta_loglik(c, *t))
            .sum()
    }
}

fn monitor_names(k: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..k).map(|i| format!("p[{i}]")).collect();
    names.extend((0..k).map(|i| format!("theta[{i}]")));
    names.push("mu".into());
    names.push("sigma_sq".into());
    names
}

pub fn estimate_berry_bhm(
    data: &TrialData,
    cfg: &BerryConfig,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
) -> Result<EstimateVector> {
    cfg.validate()?;
    let data = validate_trial(data.clone())?;
    let summary = run_chain(&BerryModel { data: &data, cfg }, mcmc, rng)?;
    rates_from_summary(&summary, data.k())
}

