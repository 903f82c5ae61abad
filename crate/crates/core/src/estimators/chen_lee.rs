//! Two-step clustered hierarchical model.
//!
//! Step one clusters the observed proportions with a Dirichlet-process
//! mixture and records how often each pair of cohorts shares a cluster.
//! Step two fits, for every target cohort `t`, a hierarchical logit model in
//! which cohort `j`'s precision is scaled by `C[t][j]`, so that cohorts that
//! rarely cluster with the target barely inform it.

use serde::{Deserialize, Serialize};

use super::{initial_theta, theta_loglik};
use crate::error::{Error, Result};
use crate::kernel::dist::{gamma_rate, ln_normal_pdf, normal, uniform};
use crate::kernel::{expit, RngStream};
use crate::mcmc::{run_chain, ChainModel, McmcConfig, Proposals, StepFailure};
use crate::trial::{validate_trial, EstimateVector, TrialData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChenLeeConfig {
    /// Dirichlet-process concentration.
    pub crp_alpha: f64,
    /// Observation variance of a proportion around its cluster mean.
    pub sigma_d_sq: f64,
    pub base_mean: f64,
    pub base_var: f64,
    /// Prior mean of μ₁ on the logit scale.
    pub mu2: f64,
    /// Prior precision of μ₁.
    pub tau2: f64,
    pub tau1_shape: f64,
    pub tau1_rate: f64,
    /// Retained clustering sweeps.
    pub crp_iterations: usize,
    /// Discarded clustering sweeps before the retained ones.
    pub crp_burn: usize,
}

impl Default for ChenLeeConfig {
    fn default() -> Self {
        Self {
            crp_alpha: 1e-60,
            sigma_d_sq: 0.001,
            base_mean: 0.2,
            base_var: 10.0,
            mu2: 0.0,
            tau2: 0.1,
            tau1_shape: 50.0,
            tau1_rate: 10.0,
            crp_iterations: 5000,
            crp_burn: 1000,
        }
    }
}

impl ChenLeeConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        for (key, v) in [
            ("chen_lee.crp_alpha", self.crp_alpha),
            ("chen_lee.sigma_d_sq", self.sigma_d_sq),
            ("chen_lee.base_var", self.base_var),
            ("chen_lee.tau2", self.tau2),
            ("chen_lee.tau1_shape", self.tau1_shape),
            ("chen_lee.tau1_rate", self.tau1_rate),
        ] {
            if !pos(v) {
                return Err(Error::config(key, "must be positive"));
            }
        }
        for (key, v) in [("chen_lee.base_mean", self.base_mean), ("chen_lee.mu2", self.mu2)] {
            if !v.is_finite() {
                return Err(Error::config(key, "must be finite"));
            }
        }
        if self.crp_iterations == 0 {
            return Err(Error::config("chen_lee.crp_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Symmetric K×K matrix of co-clustering frequencies, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    k: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }
}

/// Conjugate normal cluster: proportions `x ~ N(μ, σ_d²)`, `μ ~ N(m₀, v₀)`.
struct ClusterModel {
    obs_var: f64,
    base_mean: f64,
    base_var: f64,
}

impl ClusterModel {
    /// Log predictive density of `x` given a cluster with `count` members
    /// summing to `sum`.
    fn ln_predictive(&self, x: f64, sum: f64, count: usize) -> f64 {
        let v = 1.0 / (1.0 / self.base_var + count as f64 / self.obs_var);
        let m = v * (self.base_mean / self.base_var + sum / self.obs_var);
        ln_normal_pdf(x, m, v + self.obs_var)
    }

    /// Log marginal likelihood of a set of observations, by the chain rule.
    fn ln_marginal(&self, xs: impl Iterator<Item = f64>) -> f64 {
        let (mut sum, mut count, mut total) = (0.0, 0usize, 0.0);
        for x in xs {
            total += self.ln_predictive(x, sum, count);
            sum += x;
            count += 1;
        }
        total
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Relabels cluster ids to first-occurrence order.
fn canonical(labels: &mut [usize]) {
    let mut map: Vec<Option<usize>> = vec![None; labels.len()];
    let mut next = 0;
    for l in labels.iter_mut() {
        let id = *map[*l].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        *l = id;
    }
}

struct Crp<'a> {
    xs: &'a [f64],
    model: ClusterModel,
    ln_alpha: f64,
}

impl Crp<'_> {
    fn members(&self, labels: &[usize], c: usize) -> impl Iterator<Item = f64> + '_ {
        let picked: Vec<f64> = labels
            .iter()
            .zip(self.xs)
            .filter(|(l, _)| **l == c)
            .map(|(_, x)| *x)
            .collect();
        picked.into_iter()
    }

    /// One collapsed Gibbs pass over all cohorts.
    fn gibbs(&self, labels: &mut [usize], rng: &mut RngStream) {
        let k = self.xs.len();
        for i in 0..k {
            let mut stats: Vec<(f64, usize)> = vec![(0.0, 0); k];
            for j in (0..k).filter(|&j| j != i) {
                stats[labels[j]].0 += self.xs[j];
                stats[labels[j]].1 += 1;
            }
            let mut weights: Vec<(usize, f64)> = stats
                .iter()
                .enumerate()
                .filter(|(_, s)| s.1 > 0)
                .map(|(c, s)| (c, (s.1 as f64).ln() + self.model.ln_predictive(self.xs[i], s.0, s.1)))
                .collect();
            let fresh = (0..k).find(|&c| stats[c].1 == 0).unwrap_or(labels[i]);
            weights.push((fresh, self.ln_alpha + self.model.ln_predictive(self.xs[i], 0.0, 0)));
            let max = weights.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = weights.iter().map(|w| (w.1 - max).exp()).sum();
            let mut u = uniform(rng) * total;
            let mut pick = weights[weights.len() - 1].0;
            for &(c, w) in &weights {
                u -= (w - max).exp();
                if u <= 0.0 {
                    pick = c;
                    break;
                }
            }
            labels[i] = pick;
        }
        canonical(labels);
    }

    /// Random-allocation split–merge Metropolis–Hastings step.
    fn split_merge(&self, labels: &mut Vec<usize>, rng: &mut RngStream) {
        let k = self.xs.len();
        let i = (uniform(rng) * k as f64) as usize % k;
        let mut j = (uniform(rng) * (k - 1) as f64) as usize % (k - 1);
        if j >= i {
            j += 1;
        }
        let m = &self.model;
        if labels[i] == labels[j] {
            let old = labels[i];
            let fresh = labels.iter().max().unwrap() + 1;
            let mut proposal = labels.clone();
            proposal[i] = fresh;
            let others: Vec<usize> = (0..k).filter(|&l| l != i && l != j && labels[l] == old).collect();
            for &l in &others {
                if uniform(rng) < 0.5 {
                    proposal[l] = fresh;
                }
            }
            let (a, b) = (others.len() + 2 - self.count(&proposal, old), self.count(&proposal, old));
            let ln_ratio = self.ln_alpha + ln_factorial(a - 1) + ln_factorial(b - 1)
                - ln_factorial(a + b - 1)
                + m.ln_marginal(self.members(&proposal, fresh))
                + m.ln_marginal(self.members(&proposal, old))
                - m.ln_marginal(self.members(labels, old))
                + others.len() as f64 * std::f64::consts::LN_2;
            if uniform(rng).ln() < ln_ratio {
                *labels = proposal;
                canonical(labels);
            }
        } else {
            let (ci, cj) = (labels[i], labels[j]);
            let mut proposal = labels.clone();
            proposal.iter_mut().filter(|l| **l == ci).for_each(|l| *l = cj);
            let (a, b) = (self.count(labels, ci), self.count(labels, cj));
            let ln_ratio = -self.ln_alpha - ln_factorial(a - 1) - ln_factorial(b - 1)
                + ln_factorial(a + b - 1)
                + m.ln_marginal(self.members(&proposal, cj))
                - m.ln_marginal(self.members(labels, ci))
                - m.ln_marginal(self.members(labels, cj))
                - (a + b - 2) as f64 * std::f64::consts::LN_2;
            if uniform(rng).ln() < ln_ratio {
                *labels = proposal;
                canonical(labels);
            }
        }
    }

    fn count(&self, labels: &[usize], c: usize) -> usize {
        labels.iter().filter(|&&l| l == c).count()
    }
}

/// Co-clustering frequencies of the observed proportions under a
/// Dirichlet-process normal mixture.
pub fn crp_cocluster_matrix(
    data: &TrialData,
    cfg: &ChenLeeConfig,
    rng: &mut RngStream,
) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    let data = validate_trial(data.clone())?;
    let xs: Vec<f64> = data
        .cohorts
        .iter()
        .map(|c| {
            if c.n == 0 {
                Err(Error::domain("clustering needs n >= 1 in every cohort"))
            } else {
                Ok(c.r as f64 / c.n as f64)
            }
        })
        .collect::<Result<_>>()?;
    let k = xs.len();
    let crp = Crp {
        xs: &xs,
        model: ClusterModel {
            obs_var: cfg.sigma_d_sq,
            base_mean: cfg.base_mean,
            base_var: cfg.base_var,
        },
        ln_alpha: cfg.crp_alpha.ln(),
    };
    let mut labels: Vec<usize> = (0..k).collect();
    let mut together = vec![0u64; k * k];
    for sweep in 0..cfg.crp_burn + cfg.crp_iterations {
        crp.split_merge(&mut labels, rng);
        crp.gibbs(&mut labels, rng);
        if sweep >= cfg.crp_burn {
            for i in 0..k {
                for j in 0..k {
                    if labels[i] == labels[j] {
                        together[i * k + j] += 1;
                    }
                }
            }
        }
    }
    let total = cfg.crp_iterations as f64;
    Ok(SimilarityMatrix {
        k,
        values: together.into_iter().map(|c| c as f64 / total).collect(),
    })
}

/// Hierarchical fit with per-cohort precision multipliers.
struct WeightedFit<'a> {
    data: &'a TrialData,
    cfg: &'a ChenLeeConfig,
    /// Cohort indices taking part (multiplier > 0) and their multipliers.
    cohorts: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct FitState {
    theta: Vec<f64>,
    mu1: f64,
    tau1: f64,
}

impl ChainModel for WeightedFit<'_> {
    type State = FitState;

    fn initial_state(&self) -> FitState {
        let theta: Vec<f64> = self
            .cohorts
            .iter()
            .map(|&(j, _)| initial_theta(&self.data.cohorts[j]))
            .collect();
        let mu1 = theta.iter().sum::<f64>() / theta.len() as f64;
        FitState {
            theta,
            mu1,
            tau1: self.cfg.tau1_shape / self.cfg.tau1_rate,
        }
    }

    fn initial_scales(&self) -> Vec<f64> {
        vec![1.0; self.cohorts.len() + 1]
    }

    fn sweep(&self, s: &mut FitState, p: &mut Proposals, rng: &mut RngStream) -> Result<(), StepFailure> {
        let cfg = self.cfg;
        for (slot, &(j, m)) in self.cohorts.iter().enumerate() {
            let c = &self.data.cohorts[j];
            let (mu1, prec) = (s.mu1, s.tau1 * m);
            s.theta[slot] = p.step(slot, "theta", s.theta[slot], |t| {
                theta_loglik(c, t) - 0.5 * prec * (t - mu1) * (t - mu1)
            }, rng)?;
        }

        let mut wsum = 0.0;
        let mut wtheta = 0.0;
        let mut wss = 0.0;
        for (&(_, m), t) in self.cohorts.iter().zip(&s.theta) {
            wsum += m;
            wtheta += m * t;
        }
        let prec = cfg.tau2 + s.tau1 * wsum;
        s.mu1 = normal(rng, (cfg.tau2 * cfg.mu2 + s.tau1 * wtheta) / prec, 1.0 / prec);

        for (&(_, m), t) in self.cohorts.iter().zip(&s.theta) {
            wss += m * (t - s.mu1).powi(2);
        }
        s.tau1 = gamma_rate(
            rng,
            cfg.tau1_shape + 0.5 * self.cohorts.len() as f64,
            cfg.tau1_rate + 0.5 * wss,
        );
        if !(s.tau1 > 0.0 && s.tau1.is_finite()) {
            return Err(StepFailure::new("tau1", format!("drew {}", s.tau1)));
        }

        let loglik = |theta: &[f64], d: f64| -> f64 {
            self.cohorts
                .iter()
                .zip(theta)
                .map(|(&(j, _), t)| theta_loglik(&self.data.cohorts[j], t + d))
                .sum()
        };
        let base = loglik(&s.theta, 0.0);
        let sd = (1.0 / cfg.tau2).sqrt();
        let delta = p.offset_move(self.cohorts.len(), |d| {
            loglik(&s.theta, d) - base + ln_normal_pdf(s.mu1 + d, cfg.mu2, sd * sd)
                - ln_normal_pdf(s.mu1, cfg.mu2, sd * sd)
        }, rng);
        if delta != 0.0 {
            s.theta.iter_mut().for_each(|t| *t += delta);
            s.mu1 += delta;
        }
        Ok(())
    }

    fn monitor_names(&self) -> Vec<String> {
        self.cohorts.iter().map(|(j, _)| format!("p[{j}]")).collect()
    }

    fn monitor(&self, s: &FitState, out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&s.theta) {
            *o = expit(*t);
        }
    }
}

/// Estimates from a given co-clustering matrix. Targets with identical rows
/// share one fit.
pub fn chen_lee_from_similarity(
    data: &TrialData,
    sim: &SimilarityMatrix,
    cfg: &ChenLeeConfig,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
) -> Result<EstimateVector> {
    cfg.validate()?;
    let k = data.k();
    if sim.k() != k {
        return Err(Error::domain(format!(
            "similarity matrix is {}x{0} but the trial has {k} cohorts",
            sim.k()
        )));
    }
    let mut est = vec![f64::NAN; k];
    let mut fitted: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for t in 0..k {
        let row = sim.row(t);
        let means = match fitted.iter().find(|(r, _)| r.as_slice() == row) {
            Some((_, means)) => means.clone(),
            None => {
                let model = WeightedFit {
                    data,
                    cfg,
                    cohorts: row.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(j, &m)| (j, m)).collect(),
                };
                let summary = run_chain(&model, mcmc, &mut rng.child(fitted.len() as u64))?;
                let mut means = vec![f64::NAN; k];
                for (&(j, _), m) in model.cohorts.iter().zip(&summary.posterior_mean) {
                    means[j] = *m;
                }
                fitted.push((row.to_vec(), means.clone()));
                means
            }
        };
        est[t] = means[t];
    }
    EstimateVector::new(est)
}

pub fn estimate_chen_lee_bchm(
    data: &TrialData,
    cfg: &ChenLeeConfig,
    mcmc: &McmcConfig,
    rng: &mut RngStream,
) -> Result<EstimateVector> {
    let data = validate_trial(data.clone())?;
    let sim = crp_cocluster_matrix(&data, cfg, &mut rng.child(0))?;
    chen_lee_from_similarity(&data, &sim, cfg, mcmc, &mut rng.child(1))
}
