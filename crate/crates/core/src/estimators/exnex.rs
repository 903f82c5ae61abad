//! Exchangeable / non-exchangeable mixture on the log-odds scale.
//!
//! With prior probability `w` cohort `i` is exchangeable, θ_i ~ N(μ, σ²) with
//! μ ~ N(mu0_mean, mu0_var) and a prior on σ; otherwise θ_i ~ N(m, v) with
//! fixed `m`, `v`. Component indicators are drawn from their exact Bernoulli
//! conditionals after each θ_i update (which targets the mixture marginal).

use serde::{Deserialize, Serialize};

use super::{initial_theta, rates_from_summary, theta_loglik};
use crate::error::{Error, Result};
use crate::kernel::dist::{
    inverse_gamma, ln_half_normal_kernel, ln_inverse_gamma_kernel, ln_normal_pdf, normal, uniform,
};
use crate::kernel::special::log_add_exp;
use crate::kernel::{expit, RngStream};
use crate::mcmc::{
    inverse_gamma_posterior, normal_mean_posterior, run_chain, ChainModel, McmcConfig, Proposals,
    StepFailure,
};
use crate::trial::{validate_trial, EstimateVector, TrialData};

/// Prior on the spread of the exchangeable component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExScalePrior {
    /// Half-normal on the standard deviation σ with the given scale.
    HalfNormalSd { scale: f64 },
    /// Inverse-gamma on the variance σ².
    InverseGammaVar { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExnexConfig {
    /// Prior probability of the exchangeable component.
    pub ex_weight: f64,
    pub mu0_mean: f64,
    pub mu0_var: f64,
    pub ex_scale_prior: ExScalePrior,
    pub nex_mean: f64,
    pub nex_var: f64,
}

impl Default for ExnexConfig {
    fn default() -> Self {
        Self {
            ex_weight: 0.5,
            mu0_mean: 0.0,
            mu0_var: 10.0,
            ex_scale_prior: ExScalePrior::HalfNormalSd { scale: 1.0 },
            nex_mean: 0.0,
            nex_var: 10.0,
        }
    }
}

impl ExnexConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ex_weight) {
            return Err(Error::config("exnex.ex_weight", "ex_weight must lie in [0,1]"));
        }
        for (key, v) in [("exnex.mu0_var", self.mu0_var), ("exnex.nex_var", self.nex_var)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "variance must be positive"));
            }
        }
        for (key, v) in [("exnex.mu0_mean", self.mu0_mean), ("exnex.nex_mean", self.nex_mean)] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        let ok = match self.ex_scale_prior {
            ExScalePrior::HalfNormalSd { scale } => scale > 0.0 && scale.is_finite(),
            ExScalePrior::InverseGammaVar { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
        };
        if !ok {
            return Err(Error::config(
                "exnex.ex_scale_prior",
                "prior parameters must be positive",
            ));
        }
        Ok(())
    }
}

pub(crate) struct ExnexModel<'a> {
    pub data: &'a TrialData,
    pub cfg: &'a ExnexConfig,
}

#[derive(Debug, Clone)]
pub(crate) struct ExnexState {
    theta: Vec<f64>,
    mu: f64,
    /// Variance of the exchangeable component.
    ex_var: f64,
    exchangeable: Vec<bool>,
}

impl ExnexModel<'_> {
    /// Log prior density of the scale, expressed for the variance `v`, plus
    /// the Jacobian of the log-sd (half-normal) or log-variance (IG) move.
    fn ln_scale_prior(&self, v: f64) -> f64 {
        match self.cfg.ex_scale_prior {
            ExScalePrior::HalfNormalSd { scale } => {
                let sd = v.sqrt();
                ln_half_normal_kernel(sd, scale)
            }
            ExScalePrior::InverseGammaVar { shape, scale } => ln_inverse_gamma_kernel(v, shape, scale),
        }
    }

    /// Log of c^j for the rescaling move: the Jacobian on the scale
    /// coordinate (σ for half-normal, σ² for inverse-gamma).
    fn scale_jacobian(&self, log_c: f64) -> f64 {
        match self.cfg.ex_scale_prior {
            ExScalePrior::HalfNormalSd { .. } => log_c,
            ExScalePrior::InverseGammaVar { .. } => 2.0 * log_c,
        }
    }

    fn ln_ex(&self, theta: f64, mu: f64, var: f64) -> f64 {
        if self.cfg.ex_weight == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.cfg.ex_weight.ln() + ln_normal_pdf(theta, mu, var)
        }
    }

    fn ln_nex(&self, theta: f64) -> f64 {
        if self.cfg.ex_weight == 1.0 {
            f64::NEG_INFINITY
        } else {
            (1.0 - self.cfg.ex_weight).ln() + ln_normal_pdf(theta, self.cfg.nex_mean, self.cfg.nex_var)
        }
    }
}

impl ChainModel for ExnexModel<'_> {
    type State = ExnexState;

    fn initial_state(&self) -> ExnexState {
        let theta: Vec<f64> = self.data.cohorts.iter().map(initial_theta).collect();
        let mu = theta.iter().sum::<f64>() / theta.len() as f64;
        let ex_var = match self.cfg.ex_scale_prior {
            ExScalePrior::HalfNormalSd { scale } => scale * scale,
            ExScalePrior::InverseGammaVar { shape, scale } if shape > 1.0 => scale / (shape - 1.0),
            ExScalePrior::InverseGammaVar { .. } => 1.0,
        };
        let exchangeable = vec![self.cfg.ex_weight >= 0.5; theta.len()];
        ExnexState {
            theta,
            mu,
            ex_var,
            exchangeable,
        }
    }

    fn initial_scales(&self) -> Vec<f64> {
        vec![1.0; self.data.k() + 3]
    }

    fn sweep(
        &self,
        s: &mut ExnexState,
        p: &mut Proposals,
        rng: &mut RngStream,
    ) -> Result<(), StepFailure> {
        let k = self.data.k();
        let cfg = self.cfg;

        for (i, c) in self.data.cohorts.iter().enumerate() {
            let (mu, var) = (s.mu, s.ex_var);
            let t = p.step(i, "theta", s.theta[i], |t| {
                theta_loglik(c, t) + log_add_exp(self.ln_ex(t, mu, var), self.ln_nex(t))
            }, rng)?;
            s.theta[i] = t;
            let le = self.ln_ex(t, mu, var);
            let ln = self.ln_nex(t);
            let prob_ex = (le - log_add_exp(le, ln)).exp();
            s.exchangeable[i] = uniform(rng) < prob_ex;
        }

        let (sum, count) = s
            .theta
            .iter()
            .zip(&s.exchangeable)
            .filter(|(_, &e)| e)
            .fold((0.0, 0usize), |(s, n), (t, _)| (s + t, n + 1));
        let (m, v) = normal_mean_posterior(sum, count, s.ex_var, cfg.mu0_mean, cfg.mu0_var);
        s.mu = normal(rng, m, v);

        let ss: f64 = s
            .theta
            .iter()
            .zip(&s.exchangeable)
            .filter(|(_, &e)| e)
            .map(|(t, _)| (t - s.mu).powi(2))
            .sum();
        match cfg.ex_scale_prior {
            ExScalePrior::InverseGammaVar { shape, scale } => {
                let (a, b) = inverse_gamma_posterior(ss, count, shape, scale);
                s.ex_var = inverse_gamma(rng, a, b);
            }
            ExScalePrior::HalfNormalSd { .. } => {
                // Metropolis on log σ
                let log_sd = 0.5 * s.ex_var.ln();
                let new_log_sd = p.step(k, "ex_sd", log_sd, |u| {
                    let var = (2.0 * u).exp();
                    -(count as f64) * u - 0.5 * ss / var + self.ln_scale_prior(var) + u
                }, rng)?;
                s.ex_var = (2.0 * new_log_sd).exp();
            }
        }
        if !(s.ex_var > 0.0 && s.ex_var.is_finite()) {
            return Err(StepFailure::new("ex_var", format!("value {}", s.ex_var)));
        }

        // shift μ with the exchangeable θ's
        let members: Vec<usize> = (0..k).filter(|&i| s.exchangeable[i]).collect();
        let base: f64 = members
            .iter()
            .map(|&i| theta_loglik(&self.data.cohorts[i], s.theta[i]))
            .sum();
        let delta = p.offset_move(k + 1, |d| {
            members
                .iter()
                .map(|&i| theta_loglik(&self.data.cohorts[i], s.theta[i] + d))
                .sum::<f64>()
                - base
                + ln_normal_pdf(s.mu + d, cfg.mu0_mean, cfg.mu0_var)
                - ln_normal_pdf(s.mu, cfg.mu0_mean, cfg.mu0_var)
        }, rng);
        if delta != 0.0 {
            members.iter().for_each(|&i| s.theta[i] += delta);
            s.mu += delta;
        }

        // rescale exchangeable deviations from μ together with σ
        let base: f64 = members
            .iter()
            .map(|&i| theta_loglik(&self.data.cohorts[i], s.theta[i]))
            .sum();
        let log_c = p.offset_move(k + 2, |e| {
            let c = e.exp();
            members
                .iter()
                .map(|&i| theta_loglik(&self.data.cohorts[i], s.mu + c * (s.theta[i] - s.mu)))
                .sum::<f64>()
                - base
                + self.ln_scale_prior(c * c * s.ex_var)
                - self.ln_scale_prior(s.ex_var)
                + self.scale_jacobian(e)
        }, rng);
        if log_c != 0.0 {
            let c = log_c.exp();
            let mu = s.mu;
            members.iter().for_each(|&i| s.theta[i] = mu + c * (s.theta[i] - mu));
            s.ex_var *= c * c;
        }
        Ok(())
    }

    fn monitor_names(&self) -> Vec<String> {
        let k = self.data.k();
        let mut names: Vec<String> = (0..k).map(|i| format!("p[{i}]")).collect();
        names.extend((0..k).map(|i| format!("theta[{i}]")));
        names.extend((0..k).map(|i| format!("ex[{i}]")));
        names.push("mu".into());
        names.push("ex_var".into());
        names
    }

    fn monitor(&self, s: &ExnexState, out: &mut [f64]) {
        let k = s.theta.len();
        for i in 0..k {
            out[i] = expit(s.theta[i]);
            out[k + i] = s.theta[i];
            out[2 * k + i] = if s.exchangeable[i] { 1.0 } else { 0.0 };
        }
        out[3 * k] = s.mu;
        out[3 * k + 1] = s.ex_var;
    }
}

pub fn estimate_exnex(
    data: &TrialData,
    cfg: &ExnexConfig,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
) -> Result<EstimateVector> {
    cfg.validate()?;
    let data = validate_trial(data.clone())?;
    let summary = run_chain(&ExnexModel { data: &data, cfg }, mcmc, rng)?;
    rates_from_summary(&summary, data.k())
}
