//! Point estimation of cohort response rates in basket trials.
//!
//! Eight estimators map observed `(n, r)` counts per cohort to a vector of
//! response-rate estimates: the sample proportion and seven Bayesian methods
//! that borrow information across cohorts. A seeded, parallel Monte-Carlo
//! harness runs them on simulated trials and reports bias, MSE and shrinkage.

pub mod error;
pub mod estimators;
pub mod kernel;
pub mod mcmc;
pub mod partition;
pub mod report;
pub mod sim;
pub mod trial;

pub use error::{Error, Result};
pub use trial::{validate_trial, CohortData, EstimateVector, MethodId, Scenario, TrialData};
