use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Shape parameters of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub const UNIFORM: BetaParams = BetaParams {
        alpha: 1.0,
        beta: 1.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "beta shapes must be positive and finite (got {alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Conjugate update with `r` responders out of `n`.
    pub fn posterior(&self, r: u64, n: u64) -> Self {
        debug_assert!(r <= n);
        Self {
            alpha: self.alpha + r as f64,
            beta: self.beta + (n - r) as f64,
        }
    }

    /// Log density at `x` in the open unit interval.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p()
            - log_beta_unchecked(self.alpha, self.beta)
    }
}

impl TryFrom<[f64; 2]> for BetaParams {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<BetaParams> for [f64; 2] {
    fn from(p: BetaParams) -> Self {
        [p.alpha, p.beta]
    }
}

/// Log-odds of a probability strictly inside (0,1).
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("logit requires p in (0,1), got {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

/// Inverse logit, evaluated without overflow for any finite input.
pub fn expit(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binomial log-likelihood on the logit scale, without the binomial coefficient.
pub fn binomial_logit_loglik(r: u64, n: u64, theta: f64) -> f64 {
    r as f64 * theta - n as f64 * softplus(theta)
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "log_beta requires positive arguments, got ({a}, {b})"
        )));
    }
    Ok(log_beta_unchecked(a, b))
}

pub(crate) fn log_beta_unchecked(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log of the beta-binomial evidence for `r` responders out of `n` under a
/// Beta prior, **without** the binomial coefficient `C(n, r)`.
///
/// The coefficient depends only on the data, so it cancels from every ratio
/// of evidences computed for the same trial (posterior model probabilities,
/// partition weights). Dropping it also makes evidence additive over blocks:
/// pooling cohorts under one shared rate is the same formula applied to the
/// summed counts.
pub fn log_bb_marginal(r: u64, n: u64, prior: BetaParams) -> Result<f64> {
    if r > n {
        return Err(Error::InvalidData(format!("r={r} exceeds n={n}")));
    }
    Ok(log_bb_marginal_unchecked(r, n, prior))
}

pub(crate) fn log_bb_marginal_unchecked(r: u64, n: u64, prior: BetaParams) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let post = prior.posterior(r, n);
    log_beta_unchecked(post.alpha, post.beta) - log_beta_unchecked(prior.alpha, prior.beta)
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
