use std::f64::consts::LN_2;

use super::quadrature::unit_rule;
use super::special::{log_add_exp, log_beta_unchecked, BetaParams};
use crate::error::{Error, Result};

/// Hellinger distance between two Beta distributions, closed form.
///
/// `H² = 1 - B((a₁+a₂)/2, (b₁+b₂)/2) / sqrt(B(a₁,b₁) B(a₂,b₂))`. Round-off can
/// push `H²` slightly below zero for near-identical inputs; that is clamped.
pub fn hellinger_beta(p: BetaParams, q: BetaParams) -> f64 {
    let log_bc = log_beta_unchecked(
        0.5 * (p.alpha() + q.alpha()),
        0.5 * (p.beta() + q.beta()),
    ) - 0.5
        * (log_beta_unchecked(p.alpha(), p.beta()) + log_beta_unchecked(q.alpha(), q.beta()));
    let h2 = 1.0 - log_bc.exp();
    h2.max(0.0).sqrt()
}

/// Largest tolerated deviation of either density's quadrature mass from 1.
const MASS_TOLERANCE: f64 = 1e-6;

/// Jensen–Shannon divergence between two Beta distributions in bits, so the
/// result lies in `[0, 1]`.
///
/// Evaluated on the fixed 512-node composite rule with every density handled
/// in log space. The rule also integrates both densities; if either mass is
/// off by more than `1e-6` the parameters are too extreme for the rule and a
/// quadrature error is returned.
pub fn jsd_beta(p: BetaParams, q: BetaParams) -> Result<f64> {
    if p == q {
        return Ok(0.0);
    }
    let rule = unit_rule();
    let (mut mass_p, mut mass_q, mut acc) = (0.0, 0.0, 0.0);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let lf = p.ln_pdf(x);
        let lg = q.ln_pdf(x);
        let lm = log_add_exp(lf, lg) - LN_2;
        let f = lf.exp();
        let g = lg.exp();
        mass_p += w * f;
        mass_q += w * g;
        let mut term = 0.0;
        if f > 0.0 {
            term += f * (lf - lm);
        }
        if g > 0.0 {
            term += g * (lg - lm);
        }
        acc += w * term;
    }
    if (mass_p - 1.0).abs() > MASS_TOLERANCE || (mass_q - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::Quadrature(format!(
            "beta masses {mass_p:.9} and {mass_q:.9} for ({}, {}) vs ({}, {})",
            p.alpha(),
            p.beta(),
            q.alpha(),
            q.beta()
        )));
    }
    Ok((0.5 * acc / LN_2).clamp(0.0, 1.0))
}
