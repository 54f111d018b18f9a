//! Vote counting and every aggregation rule on a small hand-made profile.
//!
//! Run with `cargo run --example aggregate_votes`.

use adages::aggregation::{aggregate, eta_table, rational_to_f64, vote_counts, AggregationRule};
use adages::selection::SelectionSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 12;
    // five machines that agree on {0,1,2,3} and scatter a few extra picks
    let sets = vec![
        SelectionSet::new(d, [0, 1, 2, 3, 7])?,
        SelectionSet::new(d, [0, 1, 2, 3, 9])?,
        SelectionSet::new(d, [0, 1, 2, 5])?,
        SelectionSet::new(d, [0, 1, 3, 7, 11])?,
        SelectionSet::new(d, [0, 2, 3, 4])?,
    ];

    let profile = vote_counts(&sets, d)?;
    println!("votes m_j   {:?}", profile.counts());
    println!("sizes |S_i| {:?}", profile.machine_sizes());
    for c in 1..=profile.machines() {
        println!("  |S_({c})| = {}", profile.threshold_size(c));
    }
    let etas: Vec<String> = eta_table(&profile).iter().map(|e| e.to_string()).collect();
    println!("eta_c       [{}]", etas.join(", "));
    println!();

    let rules = [
        AggregationRule::Union,
        AggregationRule::Intersection,
        AggregationRule::Median,
        AggregationRule::FixedThreshold(4),
        AggregationRule::Adages,
        AggregationRule::AdagesModified,
    ];
    for rule in rules {
        let out = aggregate(&sets, rule)?;
        let bar = |v: &Option<_>| {
            v.as_ref()
                .map_or("n/a".to_string(), |r| format!("{:.3}", rational_to_f64(r)))
        };
        println!(
            "{:<12} c={} c0={} selected={} lambda_bar={} kappa_bar={}",
            rule.name(),
            out.threshold_used,
            out.c0,
            out.selected,
            bar(&out.lambda_bar),
            bar(&out.kappa_bar),
        );
    }
    Ok(())
}
