//! One machine: moments, equicorrelated knockoffs, lasso statistics and the
//! knockoff+ cutoff.
//!
//! Run with `cargo run --release --example knockoff_select`.

use adages::datagen::{gen_instance, partition, LinearModelSpec};
use adages::knockoff::{
    equicorrelated_s, knockoff_plus_threshold, machine_statistics, shard_moments, SelectorSettings,
};
use adages::metrics::{fdp, tpp};
use adages::seed::rng_from_seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = LinearModelSpec {
        n: 300,
        d: 30,
        s: 8,
        rho: 0.25,
        amplitude: 2.0,
        k: 1,
        seed: 11,
    };
    let instance = gen_instance(&spec, &mut rng_from_seed(spec.seed))?;
    let shard = partition(&instance.x, &instance.y, 1)?.remove(0);

    let moments = shard_moments(&shard.x)?;
    let s = equicorrelated_s(&moments.covariance)?;
    println!(
        "ridge {:.2e}, s_j on correlation scale ~ {:.3}",
        moments.ridge,
        s[0] / moments.covariance[(0, 0)]
    );

    let stats = machine_statistics(&shard, &SelectorSettings::default(), &mut rng_from_seed(99))?;
    println!("cross-validated lambda {:.4}", stats.lambda_used);
    let mut order: Vec<usize> = (0..spec.d).collect();
    order.sort_by(|&a, &b| stats.w[b].total_cmp(&stats.w[a]));
    for &j in order.iter().take(12) {
        let mark = if instance.truth.support.contains(j) {
            "signal"
        } else {
            ""
        };
        println!("  W[{j:>2}] = {:+.4} {mark}", stats.w[j]);
    }

    for q in [0.1, 0.2, 0.3] {
        let cut = knockoff_plus_threshold(&stats.w, q);
        println!(
            "q={q}: T={:.4} selected {} fdp {:.3} power {:.3}",
            cut.threshold,
            cut.selected,
            fdp(&cut.selected, &instance.truth.support)?,
            tpp(&cut.selected, &instance.truth.support)?,
        );
    }
    Ok(())
}
