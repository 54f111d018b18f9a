use num_bigint::BigInt;
use num_rational::BigRational;

use super::AggregationError;
use crate::selection::{SelectionError, SelectionSet};

/// Per-feature vote counts over `k` machine selections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteProfile {
    dimension: usize,
    counts: Vec<usize>,
    machine_sizes: Vec<usize>,
    // threshold_sizes[c] = |{j : m_j >= c}| for c in 0..=k+1
    threshold_sizes: Vec<usize>,
}

/// Counts, for each feature, how many of the selections contain it.
pub fn vote_counts(selections: &[SelectionSet], d: usize) -> Result<VoteProfile, AggregationError> {
    if selections.is_empty() {
        return Err(AggregationError::NoMachines);
    }
    let mut counts = vec![0usize; d];
    let mut machine_sizes = Vec::with_capacity(selections.len());
    for set in selections {
        if set.dimension() != d {
            return Err(SelectionError::DimensionMismatch {
                expected: d,
                found: set.dimension(),
            }
            .into());
        }
        for j in set.iter() {
            counts[j] += 1;
        }
        machine_sizes.push(set.size());
    }
    Ok(VoteProfile::build(d, counts, machine_sizes))
}

impl VoteProfile {
    fn build(dimension: usize, counts: Vec<usize>, machine_sizes: Vec<usize>) -> Self {
        let k = machine_sizes.len();
        let mut histogram = vec![0usize; k + 2];
        for &m in &counts {
            histogram[m] += 1;
        }
        let mut threshold_sizes = vec![0usize; k + 2];
        let mut running = 0;
        for c in (0..=k).rev() {
            running += histogram[c];
            threshold_sizes[c] = running;
        }
        VoteProfile {
            dimension,
            counts,
            machine_sizes,
            threshold_sizes,
        }
    }

    /// Builds a profile straight from vote counts and machine sizes.
    ///
    /// The pair must be realizable: every count in `[0, k]` and the total
    /// vote mass equal to the sum of machine sizes.
    pub fn from_counts(counts: Vec<usize>, machine_sizes: Vec<usize>) -> Result<Self, AggregationError> {
        let k = machine_sizes.len();
        if k == 0 {
            return Err(AggregationError::NoMachines);
        }
        if counts.is_empty() {
            return Err(SelectionError::ZeroDimension.into());
        }
        let d = counts.len();
        if counts.iter().any(|&m| m > k) || machine_sizes.iter().any(|&s| s > d) {
            return Err(AggregationError::InconsistentProfile);
        }
        if counts.iter().sum::<usize>() != machine_sizes.iter().sum::<usize>() {
            return Err(AggregationError::InconsistentProfile);
        }
        Ok(Self::build(d, counts, machine_sizes))
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn machines(&self) -> usize {
        self.machine_sizes.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn machine_sizes(&self) -> &[usize] {
        &self.machine_sizes
    }

    pub fn total_votes(&self) -> usize {
        self.machine_sizes.iter().sum()
    }

    /// Mean machine-wise selection size, exact.
    pub fn mean_size(&self) -> BigRational {
        BigRational::new(BigInt::from(self.total_votes()), BigInt::from(self.machines()))
    }

    pub fn max_size(&self) -> usize {
        self.machine_sizes.iter().copied().max().unwrap_or(0)
    }

    /// `|{j : m_j >= c}|`; zero for `c > k`.
    pub fn threshold_size(&self, c: usize) -> usize {
        self.threshold_sizes.get(c).copied().unwrap_or(0)
    }

    /// `|S_(c)| >= s̄`, evaluated without division.
    pub(crate) fn meets_mean_size(&self, c: usize) -> bool {
        self.machines() * self.threshold_size(c) >= self.total_votes()
    }

    pub(crate) fn check_threshold(&self, c: usize) -> Result<(), AggregationError> {
        if c == 0 || c > self.machines() {
            return Err(AggregationError::ThresholdOutOfRange { c, k: self.machines() });
        }
        Ok(())
    }
}

/// Features with at least `c` votes.
pub fn threshold_select(profile: &VoteProfile, c: usize) -> Result<SelectionSet, AggregationError> {
    profile.check_threshold(c)?;
    let members = profile
        .counts
        .iter()
        .enumerate()
        .filter_map(|(j, &m)| (m >= c).then_some(j));
    Ok(SelectionSet::new(profile.dimension, members)?)
}

/// Largest threshold whose selection is at least the mean machine size.
pub fn c_upper(profile: &VoteProfile) -> usize {
    (1..=profile.machines())
        .rev()
        .find(|&c| profile.meets_mean_size(c))
        .unwrap_or(1)
}
