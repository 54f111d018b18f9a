//! Draw an AR(1) linear-model instance, split it across machines and write
//! it as CSV.
//!
//! `cargo run --example generate_instance -- [out.csv]`

use std::fs::File;

use adages::datagen::{ar1_covariance, gen_instance, partition, write_instance_csv, LinearModelSpec};
use adages::seed::rng_from_seed;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = LinearModelSpec {
        n: 1000,
        d: 20,
        s: 5,
        rho: 0.25,
        amplitude: 2.0,
        k: 3,
        seed: 42,
    };
    spec.validate()?;
    let instance = gen_instance(&spec, &mut rng_from_seed(spec.seed))?;
    println!("support {}", instance.truth.support);
    let nonzero: Vec<String> = instance
        .truth
        .support
        .iter()
        .map(|j| format!("{:+}", instance.truth.beta[j]))
        .collect();
    println!("beta on support [{}]", nonzero.join(", "));

    // empirical lag-1 correlation against the model's rho
    let sigma = ar1_covariance(spec.d, spec.rho);
    let (a, b) = (instance.x.column(0), instance.x.column(1));
    let r = a.dot(&b) / (a.norm() * b.norm());
    println!("corr(x0, x1) = {r:.3} (model {})", sigma[(0, 1)]);

    for shard in partition(&instance.x, &instance.y, spec.k)? {
        println!(
            "machine {} rows {}..{}",
            shard.machine_id,
            shard.row_offset,
            shard.row_offset + shard.rows()
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        write_instance_csv(File::create(&path)?, &instance.x, &instance.y)?;
        println!("wrote {path}");
    }
    Ok(())
}
