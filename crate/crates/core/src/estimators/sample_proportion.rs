use crate::error::{Error, Result};
use crate::trial::{validate_trial, EstimateVector, TrialData};

/// `r_i / n_i` for every cohort.
pub fn estimate_sample_proportion(data: &TrialData) -> Result<EstimateVector> {
    let data = validate_trial(data.clone())?;
    if let Some(i) = data.cohorts.iter().position(|c| c.n == 0) {
        return Err(Error::InvalidData(format!(
            "sample proportion undefined: cohort {i} has n = 0"
        )));
    }
    EstimateVector::new(
        data.cohorts
            .iter()
            .map(|c| c.r as f64 / c.n as f64)
            .collect(),
    )
}
