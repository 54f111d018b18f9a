use std::cmp::Ordering;
use std::fmt;

use super::{AggregationError, VoteProfile};

/// Ratio of consecutive threshold-set sizes, kept exact.
#[derive(Debug, Clone, Copy)]
pub enum ComplexityRatio {
    Finite { numerator: usize, denominator: usize },
    Infinite,
}

impl ComplexityRatio {
    fn finite(numerator: usize, denominator: usize) -> Self {
        debug_assert!(denominator > 0);
        ComplexityRatio::Finite { numerator, denominator }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ComplexityRatio::Infinite)
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ComplexityRatio::Finite { numerator, denominator } => numerator as f64 / denominator as f64,
            ComplexityRatio::Infinite => f64::INFINITY,
        }
    }
}

impl Ord for ComplexityRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        use ComplexityRatio::*;
        match (self, other) {
            (Infinite, Infinite) => Ordering::Equal,
            (Infinite, Finite { .. }) => Ordering::Greater,
            (Finite { .. }, Infinite) => Ordering::Less,
            (
                Finite {
                    numerator: a,
                    denominator: b,
                },
                Finite {
                    numerator: c,
                    denominator: d,
                },
            ) => (*a as u128 * *d as u128).cmp(&(*c as u128 * *b as u128)),
        }
    }
}

impl PartialEq for ComplexityRatio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ComplexityRatio {}

impl PartialOrd for ComplexityRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ComplexityRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComplexityRatio::Finite { numerator, denominator } => write!(f, "{numerator}/{denominator}"),
            ComplexityRatio::Infinite => f.write_str("inf"),
        }
    }
}

/// Surrogate ratio `(|S_(c)| + 1) / (|S_(c+1)| + 1)`, infinite at `c = k`.
pub fn complexity_ratio(profile: &VoteProfile, c: usize) -> Result<ComplexityRatio, AggregationError> {
    profile.check_threshold(c)?;
    if c == profile.machines() {
        return Ok(ComplexityRatio::Infinite);
    }
    Ok(ComplexityRatio::finite(
        profile.threshold_size(c) + 1,
        profile.threshold_size(c + 1) + 1,
    ))
}

/// Unsmoothed ratio `|S_(c)| / |S_(c+1)|`, infinite when the next set is
/// empty. Diagnostics only; thresholds are chosen with the surrogate.
pub fn raw_complexity_ratio(profile: &VoteProfile, c: usize) -> Result<ComplexityRatio, AggregationError> {
    profile.check_threshold(c)?;
    let next = profile.threshold_size(c + 1);
    if next == 0 {
        return Ok(ComplexityRatio::Infinite);
    }
    Ok(ComplexityRatio::finite(profile.threshold_size(c), next))
}

/// Surrogate ratios for `c = 1..=k`.
pub fn eta_table(profile: &VoteProfile) -> Vec<ComplexityRatio> {
    (1..=profile.machines())
        .map(|c| complexity_ratio(profile, c).expect("c in range"))
        .collect()
}
