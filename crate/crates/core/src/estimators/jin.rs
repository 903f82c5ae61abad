//! Calibrated hierarchical model with distance-driven correlation.
//!
//! θ = θ₀·1 + η + ε with η ~ MVN(0, σ²Ω), ε_i ~ N(0, τ²) and
//! Ω_ij = exp(−φ d_ij²), where d_ij is the Hellinger distance between the
//! standalone Beta(1+r, 1+n−r) posteriors. η is integrated out, so the chain
//! runs on θ ~ MVN(θ₀·1, σ²Ω + τ²I) and stays well defined when cohorts are
//! identical and Ω is singular.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{initial_theta, rates_from_summary, theta_loglik};
use crate::error::{Error, Result};
use crate::kernel::dist::{inverse_gamma, ln_gamma_kernel, ln_inverse_gamma_kernel, ln_normal_pdf, normal};
use crate::kernel::{expit, hellinger_beta, BetaParams, RngStream};
use crate::mcmc::{inverse_gamma_posterior, run_chain, ChainModel, McmcConfig, Proposals, StepFailure};
use crate::trial::{validate_trial, EstimateVector, TrialData};

const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JinConfig {
    /// Prior mean of θ₀.
    pub mu0: f64,
    /// Prior on the variance of θ₀.
    pub sigma0_sq_prior: InverseGammaPrior,
    pub sigma_sq_prior: InverseGammaPrior,
    pub tau_sq_prior: InverseGammaPrior,
    pub phi_prior: GammaPrior,
}

impl Default for JinConfig {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            sigma0_sq_prior: InverseGammaPrior { shape: 0.1, scale: 0.1 },
            sigma_sq_prior: InverseGammaPrior { shape: 0.01, scale: 0.01 },
            tau_sq_prior: InverseGammaPrior { shape: 0.01, scale: 0.01 },
            phi_prior: GammaPrior { shape: 1.5, rate: 1.0 },
        }
    }
}

impl JinConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.mu0.is_finite() {
            return Err(Error::config("jin.mu0", "must be finite"));
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        for (key, p) in [
            ("jin.sigma0_sq_prior", self.sigma0_sq_prior),
            ("jin.sigma_sq_prior", self.sigma_sq_prior),
            ("jin.tau_sq_prior", self.tau_sq_prior),
        ] {
            if !(pos(p.shape) && pos(p.scale)) {
                return Err(Error::config(key, "shape and scale must be positive"));
            }
        }
        if !(pos(self.phi_prior.shape) && pos(self.phi_prior.rate)) {
            return Err(Error::config("jin.phi_prior", "shape and rate must be positive"));
        }
        Ok(())
    }
}

/// Pairwise squared Hellinger distances between standalone posteriors.
pub fn jin_squared_distances(data: &TrialData) -> DMatrix<f64> {
    let post: Vec<BetaParams> = data
        .cohorts
        .iter()
        .map(|c| BetaParams::UNIFORM.posterior(c.r, c.n))
        .collect();
    let k = post.len();
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            0.0
        } else {
            hellinger_beta(post[i], post[j]).powi(2)
        }
    })
}

pub(crate) struct JinModel<'a> {
    data: &'a TrialData,
    cfg: &'a JinConfig,
    d_sq: DMatrix<f64>,
    warned: Cell<bool>,
}

#[derive(Debug, Clone)]
pub(crate) struct JinState {
    theta: Vec<f64>,
    theta0: f64,
    sigma0_sq: f64,
    sigma_sq: f64,
    tau_sq: f64,
    phi: f64,
}

/// Cholesky factor of the marginal covariance of θ.
struct Factor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    log_det: f64,
}

impl<'a> JinModel<'a> {
    pub(crate) fn new(data: &'a TrialData, cfg: &'a JinConfig) -> Self {
        Self {
            data,
            cfg,
            d_sq: jin_squared_distances(data),
            warned: Cell::new(false),
        }
    }

    fn factor(&self, sigma_sq: f64, tau_sq: f64, phi: f64) -> Option<Factor> {
        let k = self.data.k();
        let mut cov = DMatrix::from_fn(k, k, |i, j| sigma_sq * (-phi * self.d_sq[(i, j)]).exp());
        for i in 0..k {
            cov[(i, i)] += tau_sq;
        }
        let chol = match cov.clone().cholesky() {
            Some(c) => c,
            None => {
                if !self.warned.replace(true) {
                    log::warn!(
                        "covariance not positive definite (sigma_sq={sigma_sq}, tau_sq={tau_sq}, phi={phi}); adding {JITTER} to the diagonal"
                    );
                }
                for i in 0..k {
                    cov[(i, i)] += JITTER;
                }
                cov.cholesky()?
            }
        };
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(Factor { chol, log_det })
    }

    fn ln_mvn(&self, theta: &[f64], theta0: f64, f: &Factor) -> f64 {
        let resid = DVector::from_iterator(theta.len(), theta.iter().map(|t| t - theta0));
        let solved = f.chol.solve(&resid);
        -0.5 * f.log_det - 0.5 * resid.dot(&solved)
    }

    /// Log density of θ under the covariance parameters, or −∞ when the
    /// covariance cannot be factored.
    fn ln_theta_given(&self, s: &JinState, sigma_sq: f64, tau_sq: f64, phi: f64) -> f64 {
        match self.factor(sigma_sq, tau_sq, phi) {
            Some(f) => self.ln_mvn(&s.theta, s.theta0, &f),
            None => f64::NEG_INFINITY,
        }
    }

    fn loglik(&self, theta: &[f64]) -> f64 {
        self.data
            .cohorts
            .iter()
            .zip(theta)
            .map(|(c, t)| theta_loglik(c, *t))
            .sum()
    }
}

impl ChainModel for JinModel<'_> {
    type State = JinState;

    fn initial_state(&self) -> JinState {
        let theta: Vec<f64> = self.data.cohorts.iter().map(initial_theta).collect();
        let theta0 = theta.iter().sum::<f64>() / theta.len() as f64;
        JinState {
            theta,
            theta0,
            sigma0_sq: 1.0,
            sigma_sq: 1.0,
            tau_sq: 1.0,
            phi: 1.0,
        }
    }

    fn initial_scales(&self) -> Vec<f64> {
        vec![1.0; self.data.k() + 5]
    }

    fn sweep(
        &self,
        s: &mut JinState,
        p: &mut Proposals,
        rng: &mut RngStream,
    ) -> Result<(), StepFailure> {
        let k = self.data.k();
        let cfg = self.cfg;

        let f = self
            .factor(s.sigma_sq, s.tau_sq, s.phi)
            .ok_or_else(|| StepFailure::new("covariance", "not positive definite after jitter"))?;
        let prec = f.chol.inverse();

        // θ_i from its conditional normal given the rest
        for (i, c) in self.data.cohorts.iter().enumerate() {
            let pii = prec[(i, i)];
            let cross: f64 = (0..k)
                .filter(|&j| j != i)
                .map(|j| prec[(i, j)] * (s.theta[j] - s.theta0))
                .sum();
            let cond_mean = s.theta0 - cross / pii;
            s.theta[i] = p.step(i, "theta", s.theta[i], |t| {
                theta_loglik(c, t) - 0.5 * pii * (t - cond_mean) * (t - cond_mean)
            }, rng)?;
        }

        // θ₀ | θ, Σ, σ₀²
        let ones_p: Vec<f64> = (0..k).map(|j| prec.column(j).sum()).collect();
        let one_p_one: f64 = ones_p.iter().sum();
        let one_p_theta: f64 = ones_p.iter().zip(&s.theta).map(|(a, t)| a * t).sum();
        let post_prec = 1.0 / s.sigma0_sq + one_p_one;
        let post_mean = (cfg.mu0 / s.sigma0_sq + one_p_theta) / post_prec;
        s.theta0 = normal(rng, post_mean, 1.0 / post_prec);

        let (a, b) = inverse_gamma_posterior(
            (s.theta0 - cfg.mu0).powi(2),
            1,
            cfg.sigma0_sq_prior.shape,
            cfg.sigma0_sq_prior.scale,
        );
        s.sigma0_sq = inverse_gamma(rng, a, b);
        if !(s.sigma0_sq > 0.0 && s.sigma0_sq.is_finite()) {
            return Err(StepFailure::new("sigma0_sq", format!("drew {}", s.sigma0_sq)));
        }

        // covariance parameters on the log scale (Jacobian included)
        let sp = cfg.sigma_sq_prior;
        let u = p.step(k, "sigma_sq", s.sigma_sq.ln(), |u| {
            let v = u.exp();
            self.ln_theta_given(s, v, s.tau_sq, s.phi) + ln_inverse_gamma_kernel(v, sp.shape, sp.scale) + u
        }, rng)?;
        s.sigma_sq = u.exp();

        let tp = cfg.tau_sq_prior;
        let u = p.step(k + 1, "tau_sq", s.tau_sq.ln(), |u| {
            let v = u.exp();
            self.ln_theta_given(s, s.sigma_sq, v, s.phi) + ln_inverse_gamma_kernel(v, tp.shape, tp.scale) + u
        }, rng)?;
        s.tau_sq = u.exp();

        let pp = cfg.phi_prior;
        let u = p.step(k + 2, "phi", s.phi.ln(), |u| {
            let v = u.exp();
            self.ln_theta_given(s, s.sigma_sq, s.tau_sq, v) + ln_gamma_kernel(v, pp.shape, pp.rate) + u
        }, rng)?;
        s.phi = u.exp();

        // shift θ and θ₀ together; the MVN term is unchanged
        let base = self.loglik(&s.theta);
        let delta = p.offset_move(k + 3, |d| {
            let shifted: Vec<f64> = s.theta.iter().map(|t| t + d).collect();
            self.loglik(&shifted) - base + ln_normal_pdf(s.theta0 + d, cfg.mu0, s.sigma0_sq)
                - ln_normal_pdf(s.theta0, cfg.mu0, s.sigma0_sq)
        }, rng);
        if delta != 0.0 {
            s.theta.iter_mut().for_each(|t| *t += delta);
            s.theta0 += delta;
        }

        // rescale θ − θ₀ by c with σ², τ² by c²; the MVN term changes by
        // −K ln c, cancelled by K ln c of the Jacobian, leaving 4 ln c
        let base = self.loglik(&s.theta);
        let log_c = p.offset_move(k + 4, |e| {
            let c = e.exp();
            let scaled: Vec<f64> = s.theta.iter().map(|t| s.theta0 + c * (t - s.theta0)).collect();
            self.loglik(&scaled) - base
                + ln_inverse_gamma_kernel(c * c * s.sigma_sq, sp.shape, sp.scale)
                - ln_inverse_gamma_kernel(s.sigma_sq, sp.shape, sp.scale)
                + ln_inverse_gamma_kernel(c * c * s.tau_sq, tp.shape, tp.scale)
                - ln_inverse_gamma_kernel(s.tau_sq, tp.shape, tp.scale)
                + 4.0 * e
        }, rng);
        if log_c != 0.0 {
            let c = log_c.exp();
            let t0 = s.theta0;
            s.theta.iter_mut().for_each(|t| *t = t0 + c * (*t - t0));
            s.sigma_sq *= c * c;
            s.tau_sq *= c * c;
        }
        Ok(())
    }

    fn monitor_names(&self) -> Vec<String> {
        let k = self.data.k();
        let mut names: Vec<String> = (0..k).map(|i| format!("p[{i}]")).collect();
        names.extend((0..k).map(|i| format!("theta[{i}]")));
        names.extend(["theta0", "sigma0_sq", "sigma_sq", "tau_sq", "phi"].map(String::from));
        names
    }

    fn monitor(&self, s: &JinState, out: &mut [f64]) {
        let k = s.theta.len();
        for (i, t) in s.theta.iter().enumerate() {
            out[i] = expit(*t);
            out[k + i] = *t;
        }
        out[2 * k..].copy_from_slice(&[s.theta0, s.sigma0_sq, s.sigma_sq, s.tau_sq, s.phi]);
    }
}

pub fn estimate_jin_cbhm(
    data: &TrialData,
    cfg: &JinConfig,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
) -> Result<EstimateVector> {
    cfg.validate()?;
    let data = validate_trial(data.clone())?;
    let summary = run_chain(&JinModel::new(&data, cfg), mcmc, rng)?;
    rates_from_summary(&summary, data.k())
}
