//! Metropolis-within-Gibbs machinery shared by the hierarchical estimators.
//!
//! A model implements [`ChainModel`]: it owns its state type, performs one
//! full sweep of conditional updates, and reports the quantities to be
//! summarized. Random-walk Metropolis updates go through [`Proposals`], which
//! tracks one proposal scale per updated coordinate and tunes it by
//! Robbins–Monro on the log scale during burn-in only. Scales are frozen
//! before the first retained draw.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::dist::{inverse_gamma, normal, standard_normal, uniform};
use crate::kernel::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    /// Number of initial burn-in sweeps during which proposal scales adapt.
    pub adapt_window: usize,
    pub target_accept: f64,
    /// Keep the retained monitor values in the summary.
    pub keep_draws: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_burn: 2000,
            n_keep: 8000,
            thin: 1,
            adapt_window: 2000,
            target_accept: 0.44,
            keep_draws: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_keep == 0 {
            return Err(Error::config("mcmc.n_keep", "n_keep must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::config("mcmc.thin", "thin must be at least 1"));
        }
        if self.n_keep < self.thin {
            return Err(Error::config(
                "mcmc.thin",
                "thin larger than n_keep leaves no retained draws",
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::config(
                "mcmc.target_accept",
                "target_accept must lie in (0,1)",
            ));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.n_keep / self.thin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub posterior_mean: Vec<f64>,
    pub posterior_sd: Vec<f64>,
    pub accept_rate: Vec<f64>,
    pub retained: usize,
    /// Row per retained draw, present when `keep_draws` was set.
    pub kept_draws: Option<Vec<Vec<f64>>>,
    /// Proposal scales in effect for every retained draw.
    pub final_scales: Vec<f64>,
}

/// Outcome of one Metropolis step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhStep {
    pub value: f64,
    pub accepted: bool,
    /// `min(1, π(proposal)/π(current))`.
    pub accept_prob: f64,
}

/// One symmetric normal random-walk Metropolis step.
///
/// A non-finite target at the current value is an error; a non-finite
/// target at the proposal is a rejection.
pub fn mh_logit_step(
    theta: f64,
    mut log_target: impl FnMut(f64) -> f64,
    scale: f64,
    rng: &mut RngStream,
) -> Result<MhStep> {
    let current = log_target(theta);
    if !current.is_finite() {
        return Err(Error::domain(format!(
            "log target is {current} at the current state {theta}"
        )));
    }
    Ok(mh_step_from(theta, current, &mut log_target, scale, rng))
}

fn mh_step_from(
    theta: f64,
    current: f64,
    log_target: &mut impl FnMut(f64) -> f64,
    scale: f64,
    rng: &mut RngStream,
) -> MhStep {
    let proposal = theta + scale * standard_normal(rng);
    let proposed = log_target(proposal);
    let log_ratio = proposed - current;
    let accept_prob = if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.min(0.0).exp()
    };
    let accepted = uniform(rng) < accept_prob;
    MhStep {
        value: if accepted { proposal } else { theta },
        accepted,
        accept_prob,
    }
}

/// Error raised inside a sweep; `run_chain` attaches the iteration number.
#[derive(Debug, Clone)]
pub struct StepFailure {
    pub parameter: String,
    pub message: String,
}

impl StepFailure {
    pub fn new(parameter: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            parameter: parameter.into(),
            message: message.into(),
        }
    }
}

/// Per-coordinate random-walk proposal scales with acceptance bookkeeping.
#[derive(Debug, Clone)]
pub struct Proposals {
    log_scales: Vec<f64>,
    accepted: Vec<u64>,
    attempted: Vec<u64>,
    adapt_steps: Vec<u64>,
    adapting: bool,
    target_accept: f64,
}

impl Proposals {
    pub fn new(initial_scales: &[f64], target_accept: f64) -> Self {
        let n = initial_scales.len();
        Self {
            log_scales: initial_scales.iter().map(|s| s.ln()).collect(),
            accepted: vec![0; n],
            attempted: vec![0; n],
            adapt_steps: vec![0; n],
            adapting: false,
            target_accept,
        }
    }

    pub fn len(&self) -> usize {
        self.log_scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_scales.is_empty()
    }

    pub fn scale(&self, idx: usize) -> f64 {
        self.log_scales[idx].exp()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.log_scales.iter().map(|s| s.exp()).collect()
    }

    fn set_adapting(&mut self, on: bool) {
        self.adapting = on;
    }

    fn reset_counts(&mut self) {
        self.accepted.iter_mut().for_each(|a| *a = 0);
        self.attempted.iter_mut().for_each(|a| *a = 0);
    }

    /// Metropolis update of a scalar coordinate with proposal slot `idx`.
    ///
    /// `name` labels the coordinate in error messages.
    pub fn step(
        &mut self,
        idx: usize,
        name: &str,
        current: f64,
        mut log_target: impl FnMut(f64) -> f64,
        rng: &mut RngStream,
    ) -> Result<f64, StepFailure> {
        let lt = log_target(current);
        if !lt.is_finite() {
            return Err(StepFailure::new(
                name,
                format!("log target is {lt} at current value {current}"),
            ));
        }
        let step = mh_step_from(current, lt, &mut log_target, self.scale(idx), rng);
        self.attempted[idx] += 1;
        if step.accepted {
            self.accepted[idx] += 1;
        }
        if self.adapting {
            self.adapt_steps[idx] += 1;
            let gain = (self.adapt_steps[idx] as f64).powf(-0.6);
            self.log_scales[idx] =
                (self.log_scales[idx] + gain * (step.accept_prob - self.target_accept)).clamp(-12.0, 5.0);
        }
        Ok(step.value)
    }

    /// Joint move: proposes a scalar offset `delta` around 0 and accepts it
    /// with the target ratio returned by `log_ratio(delta)` (which must be 0
    /// at `delta = 0`). Returns the accepted offset, 0 on rejection.
    pub fn offset_move(
        &mut self,
        idx: usize,
        mut log_ratio: impl FnMut(f64) -> f64,
        rng: &mut RngStream,
    ) -> f64 {
        let step = mh_step_from(0.0, 0.0, &mut log_ratio, self.scale(idx), rng);
        self.attempted[idx] += 1;
        if step.accepted {
            self.accepted[idx] += 1;
        }
        if self.adapting {
            self.adapt_steps[idx] += 1;
            let gain = (self.adapt_steps[idx] as f64).powf(-0.6);
            self.log_scales[idx] =
                (self.log_scales[idx] + gain * (step.accept_prob - self.target_accept)).clamp(-12.0, 5.0);
        }
        step.value
    }

    fn accept_rates(&self) -> Vec<f64> {
        self.accepted
            .iter()
            .zip(&self.attempted)
            .map(|(&a, &n)| if n == 0 { 0.0 } else { a as f64 / n as f64 })
            .collect()
    }
}

/// A model runnable by [`run_chain`].
pub trait ChainModel {
    type State;

    fn initial_state(&self) -> Self::State;

    /// Starting scales, one per Metropolis coordinate.
    fn initial_scales(&self) -> Vec<f64>;

    fn sweep(
        &self,
        state: &mut Self::State,
        proposals: &mut Proposals,
        rng: &mut RngStream,
    ) -> Result<(), StepFailure>;

    /// Names of the summarized quantities.
    fn monitor_names(&self) -> Vec<String>;

    fn monitor(&self, state: &Self::State, out: &mut [f64]);
}

/// Runs `n_burn + n_keep` sweeps and summarizes every `thin`-th retained one.
pub fn run_chain<M: ChainModel>(
    model: &M,
    config: &McmcConfig,
    rng: &mut RngStream,
) -> Result<ChainSummary> {
    config.validate()?;
    let mut state = model.initial_state();
    let mut proposals = Proposals::new(&model.initial_scales(), config.target_accept);
    let names = model.monitor_names();
    let width = names.len();

    let fail = |iteration: usize, f: StepFailure| Error::Mcmc {
        iteration,
        parameter: f.parameter,
        message: f.message,
    };

    for it in 0..config.n_burn {
        proposals.set_adapting(it < config.adapt_window);
        model
            .sweep(&mut state, &mut proposals, rng)
            .map_err(|f| fail(it, f))?;
    }
    proposals.set_adapting(false);
    proposals.reset_counts();

    let retained = config.retained();
    let mut mean = vec![0.0; width];
    let mut m2 = vec![0.0; width];
    let mut row = vec![0.0; width];
    let mut kept = config.keep_draws.then(|| Vec::with_capacity(retained));
    let mut count = 0usize;
    for i in 0..config.n_keep {
        let it = config.n_burn + i;
        model
            .sweep(&mut state, &mut proposals, rng)
            .map_err(|f| fail(it, f))?;
        if (i + 1) % config.thin != 0 {
            continue;
        }
        model.monitor(&state, &mut row);
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(fail(
                it,
                StepFailure::new(names[j].clone(), format!("non-finite value {}", row[j])),
            ));
        }
        count += 1;
        for j in 0..width {
            let delta = row[j] - mean[j];
            mean[j] += delta / count as f64;
            m2[j] += delta * (row[j] - mean[j]);
        }
        if let Some(k) = kept.as_mut() {
            k.push(row.clone());
        }
    }
    debug_assert_eq!(count, retained);
    let sd = m2
        .iter()
        .map(|&s| if count > 1 { (s / (count - 1) as f64).sqrt() } else { 0.0 })
        .collect();

    Ok(ChainSummary {
        posterior_mean: mean,
        posterior_sd: sd,
        accept_rate: proposals.accept_rates(),
        retained: count,
        kept_draws: kept,
        final_scales: proposals.scales(),
    })
}

/// Posterior mean and variance of a normal mean with known likelihood
/// variance, from the sum and count of observations.
pub fn normal_mean_posterior(
    sum: f64,
    count: usize,
    likelihood_var: f64,
    prior_mean: f64,
    prior_var: f64,
) -> (f64, f64) {
    let var = 1.0 / (1.0 / prior_var + count as f64 / likelihood_var);
    (var * (prior_mean / prior_var + sum / likelihood_var), var)
}

/// Draw of a normal mean from its conjugate posterior.
pub fn gibbs_normal_mean(
    values: &[f64],
    likelihood_var: f64,
    prior_mean: f64,
    prior_var: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("gibbs_normal_mean needs at least one value"));
    }
    if !(likelihood_var > 0.0 && prior_var > 0.0) {
        return Err(Error::domain("variances must be positive"));
    }
    let (m, v) = normal_mean_posterior(
        values.iter().sum(),
        values.len(),
        likelihood_var,
        prior_mean,
        prior_var,
    );
    Ok(normal(rng, m, v))
}

/// Posterior shape and scale of an inverse-gamma variance given residuals.
pub fn inverse_gamma_posterior(
    sum_sq: f64,
    count: usize,
    prior_shape: f64,
    prior_scale: f64,
) -> (f64, f64) {
    (prior_shape + 0.5 * count as f64, prior_scale + 0.5 * sum_sq)
}

/// Draw of a normal variance from `IG(shape + m/2, scale + Σ resid² / 2)`.
pub fn gibbs_inverse_gamma_var(
    residuals: &[f64],
    prior_shape: f64,
    prior_scale: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::domain("gibbs_inverse_gamma_var needs at least one residual"));
    }
    if !(prior_shape > 0.0 && prior_scale > 0.0) {
        return Err(Error::domain("inverse-gamma prior parameters must be positive"));
    }
    let (a, b) = inverse_gamma_posterior(
        residuals.iter().map(|r| r * r).sum(),
        residuals.len(),
        prior_shape,
        prior_scale,
    );
    Ok(inverse_gamma(rng, a, b))
}
