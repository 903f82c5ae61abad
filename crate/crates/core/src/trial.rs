//! Domain values shared by the estimators and the simulation harness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patient and responder counts for one cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CohortData {
    pub n: u64,
    pub r: u64,
}

impl CohortData {
    pub fn new(n: u64, r: u64) -> Self {
        Self { n, r }
    }

    pub fn failures(&self) -> u64 {
        self.n - self.r
    }
}

/// Observed counts for every cohort of one trial, in cohort order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialData {
    pub cohorts: Vec<CohortData>,
}

impl TrialData {
    /// Builds a trial and checks it.
    pub fn new(cohorts: Vec<CohortData>) -> Result<Self> {
        validate_trial(Self { cohorts })
    }

    /// Builds a trial from parallel `n` and `r` slices.
    pub fn from_counts(n: &[u64], r: &[u64]) -> Result<Self> {
        if n.len() != r.len() {
            return Err(Error::InvalidData(format!(
                "n has {} entries but r has {}",
                n.len(),
                r.len()
            )));
        }
        Self::new(n.iter().zip(r).map(|(&n, &r)| CohortData { n, r }).collect())
    }

    /// Every cohort with the same `n` and `r`.
    pub fn uniform(k: usize, n: u64, r: u64) -> Result<Self> {
        Self::new(vec![CohortData { n, r }; k])
    }

    pub fn k(&self) -> usize {
        self.cohorts.len()
    }

    pub fn n(&self) -> impl Iterator<Item = u64> + '_ {
        self.cohorts.iter().map(|c| c.n)
    }

    pub fn r(&self) -> impl Iterator<Item = u64> + '_ {
        self.cohorts.iter().map(|c| c.r)
    }

    /// Reorders cohorts so that cohort `i` of the result is cohort `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            cohorts: perm.iter().map(|&j| self.cohorts[j]).collect(),
        }
    }
}

/// Returns the input unchanged when all count invariants hold.
///
/// Counts are unsigned, so a negative count cannot be represented here; it
/// is rejected when text input is parsed.
pub fn validate_trial(data: TrialData) -> Result<TrialData> {
    if data.cohorts.len() < 2 {
        return Err(Error::InvalidData(format!(
            "K < 2 (got {} cohort{})",
            data.cohorts.len(),
            if data.cohorts.len() == 1 { "" } else { "s" }
        )));
    }
    for (i, c) in data.cohorts.iter().enumerate() {
        if c.r > c.n {
            return Err(Error::InvalidData(format!(
                "r exceeds n in cohort {i} (r={}, n={})",
                c.r, c.n
            )));
        }
    }
    Ok(data)
}

/// A named vector of true response rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub true_rates: Vec<f64>,
}

impl Scenario {
    pub fn new(id: impl Into<String>, true_rates: Vec<f64>) -> Result<Self> {
        if let Some(p) = true_rates.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::domain(format!("true rate {p} outside [0,1]")));
        }
        Ok(Self {
            id: id.into(),
            true_rates,
        })
    }

    pub fn k(&self) -> usize {
        self.true_rates.len()
    }

    pub fn is_homogeneous(&self) -> bool {
        let (lo, hi) = min_max(&self.true_rates);
        hi == lo
    }
}

/// Per-cohort point estimates of the response rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EstimateVector(Vec<f64>);

impl EstimateVector {
    /// Values a hair outside `[0,1]` from round-off are clamped; anything
    /// further out (or NaN) is an error.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        const SLACK: f64 = 1e-12;
        let mut values = values;
        for v in values.iter_mut() {
            if !(-SLACK..=1.0 + SLACK).contains(v) {
                return Err(Error::domain(format!("estimate {v} outside [0,1]")));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for EstimateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The eight estimators compared by the harness.
///
/// The serialized names are the identifiers used in configuration and
/// output files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    SampleProportion,
    BerryBhm,
    Exnex,
    PsiodaBma,
    Fujikawa,
    JinCbhm,
    ChenLeeBchm,
    LiuLocalMem,
}

impl MethodId {
    pub const ALL: [MethodId; 8] = [
        MethodId::SampleProportion,
        MethodId::BerryBhm,
        MethodId::Exnex,
        MethodId::PsiodaBma,
        MethodId::Fujikawa,
        MethodId::JinCbhm,
        MethodId::ChenLeeBchm,
        MethodId::LiuLocalMem,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MethodId::SampleProportion => "sample_proportion",
            MethodId::BerryBhm => "berry_bhm",
            MethodId::Exnex => "exnex",
            MethodId::PsiodaBma => "psioda_bma",
            MethodId::Fujikawa => "fujikawa",
            MethodId::JinCbhm => "jin_cbhm",
            MethodId::ChenLeeBchm => "chen_lee_bchm",
            MethodId::LiuLocalMem => "liu_local_mem",
        }
    }

    /// Position in [`MethodId::ALL`]; also the method component of RNG paths.
    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn is_bayesian(&self) -> bool {
        *self != MethodId::SampleProportion
    }

    /// Whether the estimate is computed exactly rather than by MCMC.
    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            MethodId::SampleProportion
                | MethodId::PsiodaBma
                | MethodId::Fujikawa
                | MethodId::LiuLocalMem
        )
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown method `{s}`")))
    }
}

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_trial_passes_through() {
        let data = TrialData {
            cohorts: vec![CohortData::new(10, 3); 6],
        };
        assert_eq!(validate_trial(data.clone()).unwrap(), data);
    }

    #[test]
    fn responders_above_patients_rejected() {
        let data = TrialData {
            cohorts: vec![CohortData::new(10, 3), CohortData::new(10, 11)],
        };
        let err = validate_trial(data).unwrap_err().to_string();
        assert!(err.contains("r exceeds n"), "{err}");
    }

    #[test]
    fn single_cohort_rejected() {
        let err = TrialData::uniform(1, 10, 3).unwrap_err().to_string();
        assert!(err.contains("K < 2"), "{err}");
    }

    #[test]
    fn negative_count_rejected_when_parsed() {
        let parsed: std::result::Result<TrialData, _> =
            toml::from_str("cohorts = [{ n = 10, r = -1 }, { n = 10, r = 2 }]");
        assert!(parsed.is_err());
    }

    #[test]
    fn trial_round_trips_through_toml() {
        let data = TrialData::from_counts(&[10, 20, 5], &[3, 0, 5]).unwrap();
        let text = toml::to_string(&data).unwrap();
        let back: TrialData = toml::from_str(&text).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.name().parse::<MethodId>().unwrap(), m);
            assert_eq!(MethodId::ALL[m.index()], m);
        }
        assert!("berry".parse::<MethodId>().is_err());
    }

    #[test]
    fn estimate_vector_clamps_round_off_only() {
        let v = EstimateVector::new(vec![1.0 + 1e-15, -1e-16, 0.5]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0, 0.5]);
        assert!(EstimateVector::new(vec![1.01]).is_err());
        assert!(EstimateVector::new(vec![f64::NAN]).is_err());
    }
}
