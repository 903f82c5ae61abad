//! The handful of distribution families the estimators sample from.
//!
//! Parameterizations:
//! - `Normal { mean, var }` is parameterized by its **variance**.
//! - `Gamma { shape, rate }`: density ∝ x^(shape-1) exp(-rate x).
//! - `InverseGamma { shape, scale }`: density ∝ x^(-shape-1) exp(-scale / x);
//!   mean `scale / (shape - 1)` for `shape > 1`.
//! - `HalfNormal { scale }`: |Z| · scale for standard normal Z; density
//!   ∝ exp(-x² / (2 scale²)) on x ≥ 0.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::special::BetaParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal { mean: f64, var: f64 },
    Gamma { shape: f64, rate: f64 },
    InverseGamma { shape: f64, scale: f64 },
    HalfNormal { scale: f64 },
    Beta { alpha: f64, beta: f64 },
    Binomial { n: u64, p: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Normal { mean, var } => {
                if !mean.is_finite() {
                    return Err(Error::domain("normal mean must be finite"));
                }
                positive("normal variance", var)
            }
            Family::Gamma { shape, rate } => {
                positive("gamma shape", shape)?;
                positive("gamma rate", rate)
            }
            Family::InverseGamma { shape, scale } => {
                positive("inverse-gamma shape", shape)?;
                positive("inverse-gamma scale", scale)
            }
            Family::HalfNormal { scale } => positive("half-normal scale", scale),
            Family::Beta { alpha, beta } => BetaParams::new(alpha, beta).map(|_| ()),
            Family::Binomial { p, .. } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::domain(format!("binomial p must lie in [0,1], got {p}")))
                }
            }
        }
    }

    /// One draw. Binomial draws are returned as whole-number floats.
    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            Family::Normal { mean, var } => normal(rng, mean, var),
            Family::Gamma { shape, rate } => gamma_rate(rng, shape, rate),
            Family::InverseGamma { shape, scale } => inverse_gamma(rng, shape, scale),
            Family::HalfNormal { scale } => half_normal(rng, scale),
            Family::Beta { alpha, beta } => Beta::new(alpha, beta)
                .map_err(|e| Error::domain(e.to_string()))?
                .sample(rng),
            Family::Binomial { n, p } => binomial(rng, n, p) as f64,
        })
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Family::Normal { mean, .. } => Some(mean),
            Family::Gamma { shape, rate } => Some(shape / rate),
            Family::InverseGamma { shape, scale } => (shape > 1.0).then(|| scale / (shape - 1.0)),
            Family::HalfNormal { scale } => Some(scale * (2.0 / PI).sqrt()),
            Family::Beta { alpha, beta } => Some(alpha / (alpha + beta)),
            Family::Binomial { n, p } => Some(n as f64 * p),
        }
    }
}

// Hot-path samplers below skip validation. Parameters that a diverging chain
// can push out of range (overflow to infinity) yield NaN instead of a panic,
// which the chain driver reports as a divergence.

pub fn standard_normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal(rng: &mut RngStream, mean: f64, var: f64) -> f64 {
    mean + var.sqrt() * standard_normal(rng)
}

pub fn gamma_rate(rng: &mut RngStream, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).map_or(f64::NAN, |g| g.sample(rng))
}

pub fn inverse_gamma(rng: &mut RngStream, shape: f64, scale: f64) -> f64 {
    // 1/X for X ~ Gamma(shape, rate = scale)
    Gamma::new(shape, 1.0 / scale).map_or(f64::NAN, |g| 1.0 / g.sample(rng))
}

pub fn half_normal(rng: &mut RngStream, scale: f64) -> f64 {
    scale * standard_normal(rng).abs()
}

pub fn binomial(rng: &mut RngStream, n: u64, p: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("validated binomial").sample(rng)
}

pub fn uniform(rng: &mut RngStream) -> f64 {
    rng.random::<f64>()
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * d * d / var - 0.5 * var.ln() - LN_SQRT_2PI
}

/// Unnormalized: drops `shape ln(scale) - ln Γ(shape)`.
pub fn ln_inverse_gamma_kernel(x: f64, shape: f64, scale: f64) -> f64 {
    -(shape + 1.0) * x.ln() - scale / x
}

/// Unnormalized: drops `shape ln(rate) - ln Γ(shape)`.
pub fn ln_gamma_kernel(x: f64, shape: f64, rate: f64) -> f64 {
    (shape - 1.0) * x.ln() - rate * x
}

/// Unnormalized, for `x >= 0`.
pub fn ln_half_normal_kernel(x: f64, scale: f64) -> f64 {
    -0.5 * (x / scale).powi(2)
}
