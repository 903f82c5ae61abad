//! Exact enumeration of cohort partitions and the posterior over them.
//!
//! A partition groups cohorts into blocks that share one response rate. It is
//! stored as a restricted-growth assignment vector: cohort `i` belongs to
//! block `assignment[i]`, and each new block index is one more than the
//! largest index seen so far, so every grouping has exactly one
//! representation.

use crate::error::{Error, Result};
use crate::kernel::special::log_bb_marginal_unchecked;
use crate::kernel::BetaParams;
use crate::trial::{validate_trial, TrialData};

pub const MAX_COHORTS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    assignment: Vec<u8>,
    num_blocks: usize,
}

impl Partition {
    /// Canonicalizes an arbitrary labelling of blocks.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map: Vec<(usize, u8)> = Vec::new();
        let assignment = labels
            .iter()
            .map(|&l| match map.iter().find(|(k, _)| *k == l) {
                Some(&(_, v)) => v,
                None => {
                    let v = map.len() as u8;
                    map.push((l, v));
                    v
                }
            })
            .collect();
        Self {
            assignment,
            num_blocks: map.len(),
        }
    }

    pub fn assignment(&self) -> &[u8] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_of(&self, cohort: usize) -> usize {
        self.assignment[cohort] as usize
    }

    /// Summed `(r, n)` per block.
    pub fn block_totals(&self, data: &TrialData) -> Vec<(u64, u64)> {
        let mut totals = vec![(0u64, 0u64); self.num_blocks];
        for (&b, c) in self.assignment.iter().zip(&data.cohorts) {
            let t = &mut totals[b as usize];
            t.0 += c.r;
            t.1 += c.n;
        }
        totals
    }
}

/// All `Bell(k)` partitions of `k` cohorts, in lexicographic order of their
/// assignment vectors.
pub fn enumerate_partitions(k: usize) -> Result<Vec<Partition>> {
    if !(2..=MAX_COHORTS).contains(&k) {
        return Err(Error::domain(format!(
            "partition enumeration supports 2..={MAX_COHORTS} cohorts, got {k}"
        )));
    }
    let mut out = Vec::new();
    let mut a = vec![0u8; k];
    // max_before[i] = max(a[0..i]) lets each position range over 0..=max+1
    let mut max_before = vec![0u8; k + 1];
    loop {
        for i in 1..k {
            max_before[i + 1] = max_before[i].max(a[i]);
        }
        out.push(Partition {
            assignment: a.clone(),
            num_blocks: max_before[k] as usize + 1,
        });
        // advance the rightmost position that can still grow
        let mut i = k - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if a[i] <= max_before[i] {
                a[i] += 1;
                for x in a.iter_mut().skip(i + 1) {
                    *x = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// Sum over blocks of the beta-binomial evidence of the pooled block counts.
pub fn partition_log_evidence(part: &Partition, data: &TrialData, prior: BetaParams) -> Result<f64> {
    if part.len() != data.k() {
        return Err(Error::InvalidData(format!(
            "partition covers {} cohorts but trial has {}",
            part.len(),
            data.k()
        )));
    }
    Ok(log_evidence_unchecked(part, data, prior))
}

fn log_evidence_unchecked(part: &Partition, data: &TrialData, prior: BetaParams) -> f64 {
    part.block_totals(data)
        .into_iter()
        .map(|(r, n)| log_bb_marginal_unchecked(r, n, prior))
        .sum()
}

#[derive(Debug, Clone)]
pub struct PartitionPosterior {
    pub partitions: Vec<Partition>,
    /// Normalized log prior probabilities.
    pub log_prior: Vec<f64>,
    pub log_evidence: Vec<f64>,
    pub posterior_prob: Vec<f64>,
}

/// Posterior over all partitions with prior ∝ `num_blocks^model_prior_exponent`.
pub fn partition_posterior(
    data: &TrialData,
    prior: BetaParams,
    model_prior_exponent: f64,
) -> Result<PartitionPosterior> {
    let data = validate_trial(data.clone())?;
    if !model_prior_exponent.is_finite() {
        return Err(Error::domain("model prior exponent must be finite"));
    }
    let partitions = enumerate_partitions(data.k())?;

    let mut log_prior: Vec<f64> = partitions
        .iter()
        .map(|p| model_prior_exponent * (p.num_blocks() as f64).ln())
        .collect();
    let norm = log_sum_exp(&log_prior);
    log_prior.iter_mut().for_each(|lp| *lp -= norm);

    let log_evidence: Vec<f64> = partitions
        .iter()
        .map(|p| log_evidence_unchecked(p, &data, prior))
        .collect();

    let log_post: Vec<f64> = log_prior.iter().zip(&log_evidence).map(|(a, b)| a + b).collect();
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut posterior_prob: Vec<f64> = log_post.iter().map(|lp| (lp - max).exp()).collect();
    let total: f64 = posterior_prob.iter().sum();
    posterior_prob.iter_mut().for_each(|p| *p /= total);

    Ok(PartitionPosterior {
        partitions,
        log_prior,
        log_evidence,
        posterior_prob,
    })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Relative tolerance under which two log posterior weights count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Highest-posterior partition. Ties go to the partition with fewer blocks,
/// then to the one enumerated first.
pub fn map_partition(post: &PartitionPosterior) -> Result<&Partition> {
    if post.partitions.is_empty() {
        return Err(Error::domain("empty partition posterior"));
    }
    let score = |i: usize| post.log_prior[i] + post.log_evidence[i];
    let mut best = 0;
    for i in 1..post.partitions.len() {
        let (s, b) = (score(i), score(best));
        let tol = TIE_TOLERANCE * s.abs().max(b.abs()).max(1.0);
        if s > b + tol
            || ((s - b).abs() <= tol
                && post.partitions[i].num_blocks() < post.partitions[best].num_blocks())
        {
            best = i;
        }
    }
    Ok(&post.partitions[best])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bell_triangle(k: usize) -> u64 {
        let mut row = vec![1u64];
        for _ in 1..k {
            let mut next = vec![*row.last().unwrap()];
            for &x in &row {
                let v = next.last().unwrap() + x;
                next.push(v);
            }
            row = next;
        }
        *row.last().unwrap()
    }

    #[test]
    fn two_cohorts_by_hand() {
        let parts = enumerate_partitions(2).unwrap();
        let v: Vec<&[u8]> = parts.iter().map(|p| p.assignment()).collect();
        assert_eq!(v, vec![&[0, 0][..], &[0, 1][..]]);
        assert_eq!(parts[0].num_blocks(), 1);
        assert_eq!(parts[1].num_blocks(), 2);
    }

    #[test]
    fn counts_match_bell_numbers() {
        for k in 2..=8 {
            let parts = enumerate_partitions(k).unwrap();
            assert_eq!(parts.len() as u64, bell_triangle(k), "k={k}");
            assert!(parts.windows(2).all(|w| w[0].assignment < w[1].assignment));
            for p in &parts {
                assert_eq!(Partition::from_labels(
                    &p.assignment().iter().map(|&b| b as usize).collect::<Vec<_>>()
                ), *p);
            }
        }
        assert_eq!(enumerate_partitions(3).unwrap().len(), 5);
        assert_eq!(enumerate_partitions(6).unwrap().len(), 203);
    }

    #[test]
    fn enumeration_range_guard() {
        assert!(enumerate_partitions(1).is_err());
        assert!(enumerate_partitions(13).is_err());
    }

    #[test]
    fn from_labels_canonicalizes() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.assignment(), &[0, 1, 0, 2]);
        assert_eq!(p.num_blocks(), 3);
    }

    #[test]
    fn evidence_hand_values() {
        let data = TrialData::from_counts(&[1, 1], &[1, 0]).unwrap();
        let u = BetaParams::UNIFORM;
        let pooled = Partition::from_labels(&[0, 0]);
        let split = Partition::from_labels(&[0, 1]);
        let e_pooled = partition_log_evidence(&pooled, &data, u).unwrap();
        let e_split = partition_log_evidence(&split, &data, u).unwrap();
        assert!((e_pooled - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        assert!((e_split - 0.25f64.ln()).abs() < 1e-14);
        assert!(partition_log_evidence(&Partition::from_labels(&[0, 0, 1]), &data, u).is_err());
    }

    #[test]
    fn empty_data_has_unit_evidence() {
        let data = TrialData::uniform(4, 0, 0).unwrap();
        for p in enumerate_partitions(4).unwrap() {
            assert_eq!(partition_log_evidence(&p, &data, BetaParams::UNIFORM).unwrap(), 0.0);
        }
        let post = partition_posterior(&data, BetaParams::UNIFORM, 0.0).unwrap();
        for &p in &post.posterior_prob {
            assert!((p - 1.0 / 15.0).abs() < 1e-15);
        }
        assert_eq!(map_partition(&post).unwrap().num_blocks(), 1);
    }

    #[test]
    fn relabelled_grouping_has_same_evidence() {
        let data = TrialData::from_counts(&[5, 7, 9], &[1, 4, 2]).unwrap();
        let a = Partition::from_labels(&[2, 2, 5]);
        let b = Partition::from_labels(&[0, 0, 1]);
        assert_eq!(
            partition_log_evidence(&a, &data, BetaParams::UNIFORM).unwrap(),
            partition_log_evidence(&b, &data, BetaParams::UNIFORM).unwrap()
        );
    }

    #[test]
    fn two_cohort_posterior_and_map() {
        let data = TrialData::from_counts(&[1, 1], &[1, 0]).unwrap();
        let post = partition_posterior(&data, BetaParams::UNIFORM, 0.0).unwrap();
        assert!((post.posterior_prob[0] - 0.4).abs() < 1e-14);
        assert!((post.posterior_prob[1] - 0.6).abs() < 1e-14);
        assert_eq!(map_partition(&post).unwrap().assignment(), &[0, 1]);
    }

    #[test]
    fn map_of_single_partition_list() {
        let post = PartitionPosterior {
            partitions: vec![Partition::from_labels(&[0, 1, 1])],
            log_prior: vec![0.0],
            log_evidence: vec![-3.0],
            posterior_prob: vec![1.0],
        };
        assert_eq!(map_partition(&post).unwrap().assignment(), &[0, 1, 1]);
    }

    #[test]
    fn exact_tie_prefers_fewer_blocks() {
        let post = PartitionPosterior {
            partitions: vec![Partition::from_labels(&[0, 1]), Partition::from_labels(&[0, 0])],
            log_prior: vec![-0.5f64.ln().abs(); 2],
            log_evidence: vec![-1.25, -1.25],
            posterior_prob: vec![0.5, 0.5],
        };
        assert_eq!(map_partition(&post).unwrap().assignment(), &[0, 0]);
    }

    #[test]
    fn exponent_favours_more_blocks() {
        let data = TrialData::uniform(3, 0, 0).unwrap();
        let post = partition_posterior(&data, BetaParams::UNIFORM, 1.0).unwrap();
        // blocks: [1, 2, 2, 2, 3] -> weights / 10
        let expect = [0.1, 0.2, 0.2, 0.2, 0.3];
        for (p, e) in post.posterior_prob.iter().zip(expect) {
            assert!((p - e).abs() < 1e-14);
        }
    }
}
