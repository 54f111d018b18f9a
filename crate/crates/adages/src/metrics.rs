//! Error and power functionals plus per-trial bookkeeping.
//!
//! Besides FDP and TPP this module carries the deterministic count
//! inequalities that every simulated trial is checked against.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::aggregation::{AggregationOutcome, VoteProfile};
use crate::selection::{SelectionError, SelectionSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Dimension(#[from] SelectionError),
    #[error("power is undefined for an empty true support")]
    EmptyTruth,
    #[error("aggregate is not contained in the union")]
    NotSubset,
    #[error("no records to summarize")]
    EmptyInput,
}

fn same_dimension(a: &SelectionSet, b: &SelectionSet) -> Result<(), MetricsError> {
    if a.dimension() != b.dimension() {
        return Err(SelectionError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        }
        .into());
    }
    Ok(())
}

/// False discovery proportion; an empty selection has FDP 0.
pub fn fdp(est: &SelectionSet, truth: &SelectionSet) -> Result<f64, MetricsError> {
    same_dimension(est, truth)?;
    if est.is_empty() {
        return Ok(0.0);
    }
    let false_hits = est.size() - est.overlap(truth);
    Ok(false_hits as f64 / est.size() as f64)
}

/// True positive proportion.
pub fn tpp(est: &SelectionSet, truth: &SelectionSet) -> Result<f64, MetricsError> {
    same_dimension(est, truth)?;
    if truth.is_empty() {
        return Err(MetricsError::EmptyTruth);
    }
    Ok(est.overlap(truth) as f64 / truth.size() as f64)
}

/// True features recovered by the union but missed by the aggregate.
pub fn diff_count(
    union_est: &SelectionSet,
    adages_est: &SelectionSet,
    truth: &SelectionSet,
) -> Result<usize, MetricsError> {
    same_dimension(union_est, truth)?;
    same_dimension(adages_est, truth)?;
    if !adages_est.is_subset(union_est) {
        return Err(MetricsError::NotSubset);
    }
    Ok(union_est.overlap(truth) - adages_est.overlap(truth))
}

/// `Σ_{j∈S} 1{0 < m_j < c}`: the same quantity read off the vote counts.
pub fn diff_from_votes(profile: &VoteProfile, truth: &SelectionSet, c: usize) -> usize {
    truth
        .iter()
        .filter(|&j| {
            let m = profile.counts()[j];
            m > 0 && m < c
        })
        .count()
}

pub fn power_shrinkage(c_star: usize, est_size: usize, k: usize, truth_size: usize, fdp_value: f64) -> f64 {
    (c_star * est_size) as f64 * fdp_value / (k * truth_size) as f64
}

fn false_part(sets: &[SelectionSet], truth: &SelectionSet) -> usize {
    sets.iter().map(|s| s.size() - s.overlap(truth)).sum()
}

/// `Σ_{j∈S} m_j ≤ k·|S ∩ Ŝ| + c·|Sᶜ ∩ Ŝ|` for the set `Ŝ` selected at
/// threshold `c`.
///
/// This is the power-shrinkage lower bound in count form. It is not an
/// identity of the vote algebra (see the tests for a profile breaking it),
/// so the harness treats a violation as a finding worth stopping for.
pub fn vote_mass_bound_holds(profile: &VoteProfile, truth: &SelectionSet, c: usize, selected: &SelectionSet) -> bool {
    let votes_on_truth: usize = truth.iter().map(|j| profile.counts()[j]).sum();
    let hits = selected.overlap(truth);
    let misses = selected.size() - hits;
    votes_on_truth <= profile.machines() * hits + c * misses
}

/// `|Ŝ_U ∩ Sᶜ| ≤ Σᵢ |Ŝᵢ ∩ Sᶜ|`.
pub fn union_count_holds(machine_sets: &[SelectionSet], union: &SelectionSet, truth: &SelectionSet) -> bool {
    union.size() - union.overlap(truth) <= false_part(machine_sets, truth)
}

/// `k·|Ŝ_I ∩ Sᶜ| ≤ Σᵢ |Ŝᵢ ∩ Sᶜ|`.
pub fn intersection_count_holds(
    machine_sets: &[SelectionSet],
    intersection: &SelectionSet,
    truth: &SelectionSet,
) -> bool {
    machine_sets.len() * (intersection.size() - intersection.overlap(truth)) <= false_part(machine_sets, truth)
}

/// Power bound for the adaptive aggregate, evaluated only on trials where
/// `|Ŝ| ≤ 1.5·|S|` and `c ≤ k/2`; `None` otherwise.
///
/// With `γ = |Ŝ|/|S| − 1` the bound reads
/// `tpp ≥ mean(tppᵢ) − (c/k)(1+γ)·fdp`.
pub fn shrinkage_bound_holds(
    tpp_value: f64,
    machine_tpp: &[f64],
    c: usize,
    selected_size: usize,
    truth_size: usize,
    fdp_value: f64,
) -> Option<bool> {
    let k = machine_tpp.len();
    if truth_size == 0 || 2 * selected_size > 3 * truth_size || 2 * c > k {
        return None;
    }
    let mean_tpp = machine_tpp.iter().sum::<f64>() / k as f64;
    let ratio = selected_size as f64 / truth_size as f64;
    let bound = mean_tpp - c as f64 / k as f64 * ratio * fdp_value;
    Some(tpp_value >= bound - 1e-12)
}

/// One method's aggregate within a trial.
#[derive(Debug, Clone)]
pub struct MethodRecord {
    pub method: String,
    pub outcome: AggregationOutcome,
    pub fdp: f64,
    pub power: f64,
}

/// Everything measured in one Monte-Carlo repetition.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub s: usize,
    pub rep: usize,
    pub seed: u64,
    pub truth: SelectionSet,
    /// Machine selections at level `q`; empty when the trial failed.
    pub machine_sets: Vec<SelectionSet>,
    pub machine_fdp: Vec<f64>,
    pub machine_tpp: Vec<f64>,
    pub methods: Vec<MethodRecord>,
    pub c_star: usize,
    pub c_tilde: usize,
    pub c0: usize,
    /// Union minus Adages true hits.
    pub diff: usize,
    /// Machines whose selector errored; nonzero marks the trial as failed.
    pub failures: usize,
    /// Outcome of [`shrinkage_bound_holds`] for the adaptive aggregate.
    pub shrinkage_bound: Option<bool>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.failures > 0
    }

    pub fn method(&self, name: &str) -> Option<&MethodRecord> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Min, quartiles and max by linear interpolation between order statistics.
pub fn quantiles(values: &[f64]) -> [f64; 5] {
    if values.is_empty() {
        return [f64::NAN; 5];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let h = p * (sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    [at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub method: String,
    pub k: usize,
    pub d: usize,
    pub mean_fdp: f64,
    pub mean_power: f64,
    /// Trials entering the means (failed trials are left out).
    pub reps: usize,
    pub c_star_min: f64,
    pub c_star_q25: f64,
    pub c_star_med: f64,
    pub c_star_q75: f64,
    pub c_star_max: f64,
}

/// Averages per `(method, k, d)`, in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SweepSummary>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut order: Vec<(String, usize, usize)> = Vec::new();
    let mut groups: HashMap<(String, usize, usize), Vec<&MethodRecord>> = HashMap::new();
    for record in records.iter().filter(|r| !r.failed()) {
        for m in &record.methods {
            let key = (m.method.clone(), record.k, record.d);
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(m);
        }
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let reps = rows.len();
            let mean = |f: fn(&MethodRecord) -> f64| rows.iter().map(|m| f(m)).sum::<f64>() / reps as f64;
            let thresholds: Vec<f64> = rows.iter().map(|m| m.outcome.threshold_used as f64).collect();
            let [c_star_min, c_star_q25, c_star_med, c_star_q75, c_star_max] = quantiles(&thresholds);
            SweepSummary {
                method: key.0,
                k: key.1,
                d: key.2,
                mean_fdp: mean(|m| m.fdp),
                mean_power: mean(|m| m.power),
                reps,
                c_star_min,
                c_star_q25,
                c_star_med,
                c_star_q75,
                c_star_max,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{aggregate, vote_counts, AggregationRule};

    fn set(d: usize, idx: &[usize]) -> SelectionSet {
        SelectionSet::new(d, idx.iter().copied()).unwrap()
    }

    #[test]
    fn fdp_and_tpp_examples() {
        let est = set(5, &[0, 1, 2]);
        let truth = set(5, &[1, 2, 3]);
        assert!((fdp(&est, &truth).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((tpp(&est, &truth).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(fdp(&set(5, &[]), &truth).unwrap(), 0.0);
        assert_eq!(tpp(&set(5, &[]), &truth).unwrap(), 0.0);
        assert_eq!(fdp(&truth, &truth).unwrap(), 0.0);
        assert_eq!(tpp(&set(5, &[0, 1, 2, 3]), &truth).unwrap(), 1.0);
    }

    #[test]
    fn tpp_rejects_empty_truth_and_mismatch() {
        assert_eq!(tpp(&set(3, &[0]), &set(3, &[])), Err(MetricsError::EmptyTruth));
        assert!(matches!(
            fdp(&set(3, &[0]), &set(4, &[0])),
            Err(MetricsError::Dimension(_))
        ));
    }

    #[test]
    fn diff_examples() {
        // m = [1, 0, 0], c* = 2, k = 3
        let union = set(3, &[0]);
        let agg = set(3, &[]);
        let truth = set(3, &[1]);
        assert_eq!(diff_count(&union, &agg, &set(3, &[0])).unwrap(), 1);
        assert_eq!(diff_count(&union, &agg, &truth).unwrap(), 0);
        assert_eq!(diff_count(&union, &union, &truth).unwrap(), 0);
        assert_eq!(diff_count(&agg, &union, &truth), Err(MetricsError::NotSubset));
    }

    #[test]
    fn diff_matches_vote_form() {
        let sets = vec![set(6, &[0, 1, 2]), set(6, &[1, 2, 4]), set(6, &[1, 3]), set(6, &[2, 5])];
        let truth = set(6, &[0, 1, 3, 4]);
        let profile = vote_counts(&sets, 6).unwrap();
        let union = aggregate(&sets, AggregationRule::Union).unwrap().selected;
        for c in 1..=4 {
            let agg = aggregate(&sets, AggregationRule::FixedThreshold(c)).unwrap().selected;
            assert_eq!(
                diff_count(&union, &agg, &truth).unwrap(),
                diff_from_votes(&profile, &truth, c)
            );
        }
    }

    #[test]
    fn shrinkage_examples() {
        assert_eq!(power_shrinkage(3, 10, 5, 4, 0.0), 0.0);
        assert!((power_shrinkage(2, 10, 10, 20, 0.2) - 0.02).abs() < 1e-15);
        assert!((power_shrinkage(7, 12, 7, 12, 0.2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn false_discovery_count_bounds_hold() {
        let sets = vec![set(5, &[0, 1, 4]), set(5, &[0, 2, 4]), set(5, &[0, 4])];
        let truth = set(5, &[0, 1]);
        let union = aggregate(&sets, AggregationRule::Union).unwrap().selected;
        let inter = aggregate(&sets, AggregationRule::Intersection).unwrap().selected;
        assert!(union_count_holds(&sets, &union, &truth));
        assert!(intersection_count_holds(&sets, &inter, &truth));
    }

    #[test]
    fn vote_mass_bound_holds_on_typical_profile() {
        let sets = vec![set(6, &[0, 1, 2]), set(6, &[0, 1, 3]), set(6, &[0, 1])];
        let truth = set(6, &[0, 1, 2]);
        let out = aggregate(&sets, AggregationRule::Adages).unwrap();
        let profile = vote_counts(&sets, 6).unwrap();
        assert!(vote_mass_bound_holds(
            &profile,
            &truth,
            out.threshold_used,
            &out.selected
        ));
    }

    #[test]
    fn vote_mass_bound_is_not_an_identity() {
        // m = [1,4,1,1,1,1,2]; the adaptive threshold is 2 and keeps only nulls
        let sets = vec![
            set(7, &[0]),
            set(7, &[1, 3]),
            set(7, &[1, 2, 6]),
            set(7, &[1, 4]),
            set(7, &[5, 6]),
        ];
        let truth = set(7, &[0, 2, 3, 4, 5]);
        let out = aggregate(&sets, AggregationRule::Adages).unwrap();
        assert_eq!(out.threshold_used, 2);
        let profile = vote_counts(&sets, 7).unwrap();
        assert!(!vote_mass_bound_holds(&profile, &truth, 2, &out.selected));
    }

    #[test]
    fn shrinkage_bound_skips_outside_hypotheses() {
        assert_eq!(shrinkage_bound_holds(0.5, &[0.5, 0.5], 2, 4, 4, 0.0), None);
        assert_eq!(shrinkage_bound_holds(0.5, &[0.5; 4], 1, 7, 4, 0.0), None);
        assert_eq!(shrinkage_bound_holds(0.5, &[0.5; 4], 2, 4, 4, 0.0), Some(true));
        assert_eq!(shrinkage_bound_holds(0.2, &[0.5; 4], 2, 4, 4, 0.1), Some(false));
    }

    #[test]
    fn quantile_interpolation() {
        assert_eq!(quantiles(&[3.0]), [3.0; 5]);
        assert_eq!(quantiles(&[4.0, 1.0, 2.0, 3.0, 5.0]), [1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(quantiles(&[1.0, 2.0])[2], 1.5);
    }

    fn record(fdp_value: f64, failures: usize) -> TrialRecord {
        let sets = vec![set(3, &[0])];
        let outcome = aggregate(&sets, AggregationRule::Union).unwrap();
        TrialRecord {
            k: 1,
            d: 3,
            n: 10,
            s: 1,
            rep: 0,
            seed: 0,
            truth: set(3, &[0]),
            machine_sets: sets,
            machine_fdp: vec![fdp_value],
            machine_tpp: vec![1.0],
            methods: vec![MethodRecord {
                method: "union".into(),
                outcome,
                fdp: fdp_value,
                power: 1.0,
            }],
            c_star: 1,
            c_tilde: 1,
            c0: 1,
            diff: 0,
            failures,
            shrinkage_bound: None,
        }
    }

    #[test]
    fn summary_means() {
        let one = summarize(&[record(0.25, 0)]).unwrap();
        assert_eq!(one[0].mean_fdp, 0.25);
        assert_eq!(one[0].reps, 1);
        let two = summarize(&[record(0.0, 0), record(0.4, 0), record(0.9, 1)]).unwrap();
        assert!((two[0].mean_fdp - 0.2).abs() < 1e-15);
        assert_eq!(two[0].reps, 2);
        assert_eq!(summarize(&[]), Err(MetricsError::EmptyInput));
    }
}
