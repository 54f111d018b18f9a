//! Threshold-based aggregation of machine-wise selections.
//!
//! Every machine contributes a [`SelectionSet`]; feature `j` receives
//! `m_j` votes, and a threshold rule keeps `{j : m_j >= c}`. Union and
//! Intersection are the thresholds `1` and `k`. The adaptive rule restricts
//! `c` to `[1, c0]`, where `c0` is the largest threshold whose selection is
//! no smaller than the mean machine size, then takes the minimizer of the
//! smoothed size ratio `(|S_(c)|+1)/(|S_(c+1)|+1)`.
//!
//! All arithmetic here is exact integer or rational arithmetic.

mod profile;
mod ratio;
mod rule;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::selection::{SelectionError, SelectionSet};

pub use profile::{c_upper, threshold_select, vote_counts, VoteProfile};
pub use ratio::{complexity_ratio, eta_table, raw_complexity_ratio, ComplexityRatio};
pub use rule::AggregationRule;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregationError {
    #[error("at least one machine selection is required")]
    NoMachines,
    #[error(transparent)]
    Dimension(#[from] SelectionError),
    #[error("threshold {c} outside [1, {k}]")]
    ThresholdOutOfRange { c: usize, k: usize },
    #[error("vote counts are inconsistent with machine sizes")]
    InconsistentProfile,
    #[error("{0} is not applicable: a required set is empty")]
    Degenerate(&'static str),
    #[error("unknown aggregation rule {0:?}")]
    UnknownRule(String),
}

/// Result of aggregating one vote profile under one rule.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOutcome {
    pub rule: AggregationRule,
    pub selected: SelectionSet,
    pub threshold_used: usize,
    pub c0: usize,
    /// Surrogate ratios for `c = 1..=k`.
    pub eta_table: Vec<ComplexityRatio>,
    /// `None` when some machine selected nothing.
    pub lambda_bar: Option<BigRational>,
    /// `None` when the intersection is empty.
    pub kappa_bar: Option<BigRational>,
}

fn argmin_by_key<K: Ord>(candidates: impl Iterator<Item = usize>, key: impl Fn(usize) -> K) -> usize {
    // min_by_key keeps the first minimum, i.e. the smallest c.
    candidates.min_by_key(|&c| key(c)).expect("candidate range is nonempty")
}

/// Adaptive threshold: minimizer of the surrogate complexity ratio over
/// `[1, c0]`, smallest `c` on ties.
pub fn adaptive_threshold(profile: &VoteProfile) -> usize {
    let c0 = c_upper(profile);
    argmin_by_key(1..=c0, |c| complexity_ratio(profile, c).expect("c in range"))
}

/// Modified threshold: minimizer of `c·|S_(c)|` over `[1, c0]`, smallest
/// `c` on ties.
pub fn modified_threshold(profile: &VoteProfile) -> usize {
    let c0 = c_upper(profile);
    argmin_by_key(1..=c0, |c| c * profile.threshold_size(c))
}

/// `max_i |S_i| / c* · Σ_j 1/|S_j|`.
pub fn lambda_bar(profile: &VoteProfile, c_star: usize) -> Result<BigRational, AggregationError> {
    profile.check_threshold(c_star)?;
    if profile.machine_sizes().contains(&0) {
        return Err(AggregationError::Degenerate("lambda_bar"));
    }
    let harmonic = profile.machine_sizes().iter().fold(BigRational::zero(), |acc, &s| {
        acc + BigRational::new(BigInt::from(1), BigInt::from(s))
    });
    Ok(harmonic * BigRational::new(BigInt::from(profile.max_size()), BigInt::from(c_star)))
}

/// `max_i |S_i| / |S_I|`.
pub fn kappa_bar(profile: &VoteProfile, intersection_size: usize) -> Result<BigRational, AggregationError> {
    if intersection_size == 0 {
        return Err(AggregationError::Degenerate("kappa_bar"));
    }
    Ok(BigRational::new(
        BigInt::from(profile.max_size()),
        BigInt::from(intersection_size),
    ))
}

/// Threshold a rule resolves to on a given profile.
pub fn resolve_threshold(profile: &VoteProfile, rule: AggregationRule) -> Result<usize, AggregationError> {
    let k = profile.machines();
    let c = match rule {
        AggregationRule::Union => 1,
        AggregationRule::Intersection => k,
        AggregationRule::Median => k.div_ceil(2),
        AggregationRule::FixedThreshold(c) => {
            profile.check_threshold(c)?;
            c
        }
        AggregationRule::Adages => adaptive_threshold(profile),
        AggregationRule::AdagesModified => modified_threshold(profile),
    };
    Ok(c)
}

/// Aggregates an already-built profile.
pub fn aggregate_profile(profile: &VoteProfile, rule: AggregationRule) -> Result<AggregationOutcome, AggregationError> {
    let threshold_used = resolve_threshold(profile, rule)?;
    let selected = threshold_select(profile, threshold_used)?;
    let intersection_size = profile.threshold_size(profile.machines());
    Ok(AggregationOutcome {
        rule,
        selected,
        threshold_used,
        c0: c_upper(profile),
        eta_table: eta_table(profile),
        lambda_bar: lambda_bar(profile, threshold_used).ok(),
        kappa_bar: kappa_bar(profile, intersection_size).ok(),
    })
}

/// Aggregates `k` machine selections under `rule`.
pub fn aggregate(selections: &[SelectionSet], rule: AggregationRule) -> Result<AggregationOutcome, AggregationError> {
    let d = selections.first().ok_or(AggregationError::NoMachines)?.dimension();
    let profile = vote_counts(selections, d)?;
    aggregate_profile(&profile, rule)
}

/// Converts an exact rational to the nearest `f64`, for reporting.
pub fn rational_to_f64(value: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}
