//! Numerical kernel: special functions, Beta-family distances, distribution
//! sampling and the deterministic random streams.

pub mod dist;
pub mod distance;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use dist::Family;
pub use distance::{hellinger_beta, jsd_beta};
pub use rng::RngStream;
pub use special::{expit, log_bb_marginal, log_beta, logit, BetaParams};

/// One draw from `family`; see [`Family`] for the parameterizations.
pub fn sample_distribution(family: Family, rng: &mut RngStream) -> crate::Result<f64> {
    family.sample(rng)
}
