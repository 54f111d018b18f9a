use crate::selection::SelectionSet;

/// Knockoff+ cutoff and the features it selects.
#[derive(Debug, Clone, PartialEq)]
pub struct KnockoffThreshold {
    /// `+∞` when no candidate cutoff qualifies.
    pub threshold: f64,
    pub selected: SelectionSet,
}

/// Smallest `t ∈ {|W_j| : W_j ≠ 0}` with
/// `(1 + #{W_j ≤ −t}) / max(1, #{W_j ≥ t}) ≤ q`; selects `{W_j ≥ t}`.
pub fn knockoff_plus_threshold(w: &[f64], q: f64) -> KnockoffThreshold {
    assert!(!w.is_empty(), "knockoff statistics are empty");
    let mut candidates: Vec<f64> = w.iter().filter(|&&v| v != 0.0).map(|v| v.abs()).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let threshold = candidates
        .into_iter()
        .find(|&t| {
            let negatives = w.iter().filter(|&&v| v <= -t).count();
            let positives = w.iter().filter(|&&v| v >= t).count();
            (1 + negatives) as f64 / positives.max(1) as f64 <= q
        })
        .unwrap_or(f64::INFINITY);

    let members = w.iter().enumerate().filter_map(|(j, &v)| (v >= threshold).then_some(j));
    KnockoffThreshold {
        threshold,
        selected: SelectionSet::new(w.len(), members).expect("indices < d"),
    }
}
