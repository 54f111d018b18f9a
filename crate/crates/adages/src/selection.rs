//! Feature subsets over a fixed dimension.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("feature index {index} out of range for dimension {dimension}")]
    IndexOutOfRange { index: usize, dimension: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A set of selected feature indices in `[0, d)`.
///
/// Members are kept sorted and unique, so equality and serialization are
/// canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSelection", into = "RawSelection")]
pub struct SelectionSet {
    dimension: usize,
    members: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawSelection {
    d: usize,
    selected: Vec<usize>,
}

impl TryFrom<RawSelection> for SelectionSet {
    type Error = SelectionError;

    fn try_from(raw: RawSelection) -> Result<Self, Self::Error> {
        SelectionSet::new(raw.d, raw.selected)
    }
}

impl From<SelectionSet> for RawSelection {
    fn from(set: SelectionSet) -> Self {
        RawSelection {
            d: set.dimension,
            selected: set.members,
        }
    }
}

impl SelectionSet {
    /// Builds a set from arbitrary indices; duplicates are collapsed.
    pub fn new<I>(dimension: usize, indices: I) -> Result<Self, SelectionError>
    where
        I: IntoIterator<Item = usize>,
    {
        if dimension == 0 {
            return Err(SelectionError::ZeroDimension);
        }
        let mut members: Vec<usize> = indices.into_iter().collect();
        if let Some(&index) = members.iter().find(|&&j| j >= dimension) {
            return Err(SelectionError::IndexOutOfRange { index, dimension });
        }
        members.sort_unstable();
        members.dedup();
        Ok(SelectionSet { dimension, members })
    }

    pub fn empty(dimension: usize) -> Result<Self, SelectionError> {
        Self::new(dimension, std::iter::empty())
    }

    pub fn full(dimension: usize) -> Result<Self, SelectionError> {
        Self::new(dimension, 0..dimension)
    }

    /// Builds a set from an indicator vector of length `d`.
    pub fn from_indicator(indicator: &[bool]) -> Result<Self, SelectionError> {
        Self::new(
            indicator.len(),
            indicator.iter().enumerate().filter_map(|(j, &on)| on.then_some(j)),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut out = vec![false; self.dimension];
        for &j in &self.members {
            out[j] = true;
        }
        out
    }

    fn check_same_dimension(&self, other: &SelectionSet) -> Result<(), SelectionError> {
        if self.dimension != other.dimension {
            return Err(SelectionError::DimensionMismatch {
                expected: self.dimension,
                found: other.dimension,
            });
        }
        Ok(())
    }

    pub fn intersection(&self, other: &SelectionSet) -> Result<SelectionSet, SelectionError> {
        self.check_same_dimension(other)?;
        Ok(SelectionSet {
            dimension: self.dimension,
            members: self.iter().filter(|&j| other.contains(j)).collect(),
        })
    }

    pub fn union(&self, other: &SelectionSet) -> Result<SelectionSet, SelectionError> {
        self.check_same_dimension(other)?;
        SelectionSet::new(self.dimension, self.iter().chain(other.iter()))
    }

    pub fn difference(&self, other: &SelectionSet) -> Result<SelectionSet, SelectionError> {
        self.check_same_dimension(other)?;
        Ok(SelectionSet {
            dimension: self.dimension,
            members: self.iter().filter(|&j| !other.contains(j)).collect(),
        })
    }

    pub fn complement(&self) -> SelectionSet {
        SelectionSet {
            dimension: self.dimension,
            members: (0..self.dimension).filter(|&j| !self.contains(j)).collect(),
        }
    }

    pub fn is_subset(&self, other: &SelectionSet) -> bool {
        self.dimension == other.dimension && self.iter().all(|j| other.contains(j))
    }

    /// `|self ∩ other|` without allocating.
    pub fn overlap(&self, other: &SelectionSet) -> usize {
        self.iter().filter(|&j| other.contains(j)).count()
    }

    /// Relabels features through `perm`, where feature `j` becomes `perm[j]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<SelectionSet, SelectionError> {
        if perm.len() != self.dimension {
            return Err(SelectionError::DimensionMismatch {
                expected: self.dimension,
                found: perm.len(),
            });
        }
        SelectionSet::new(self.dimension, self.iter().map(|j| perm[j]))
    }

    /// Comma-separated member list, as used by the selections file format.
    pub fn to_index_list(&self) -> String {
        let parts: Vec<String> = self.members.iter().map(|j| j.to_string()).collect();
        parts.join(",")
    }
}

impl fmt::Display for SelectionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.to_index_list())
    }
}
