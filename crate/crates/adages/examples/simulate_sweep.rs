//! A small number-of-machines sweep written to CSV.
//!
//! `cargo run --release --example simulate_sweep -- [config.json] [out_dir]`
//!
//! Without a config a quick built-in sweep runs (10 reps); the full
//! sweep configs live in `configs/`.

use std::path::PathBuf;

use adages::datagen::LinearModelSpec;
use adages::harness::{default_methods, run_sweep, write_outputs, ExperimentConfig, Sweep, SweepVariable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let config = match args.next() {
        Some(path) => ExperimentConfig::from_json_file(path.as_ref())?,
        None => ExperimentConfig {
            base: LinearModelSpec {
                n: 1000,
                d: 50,
                s: 20,
                rho: 0.25,
                amplitude: 2.0,
                k: 10,
                seed: 0,
            },
            sweep: Sweep {
                variable: SweepVariable::K,
                values: vec![2, 5, 10],
            },
            methods: default_methods(),
            q: 0.2,
            reps: 10,
            seed: 7,
            output: None,
            workers: 1,
        },
    };
    let out = run_sweep(&config)?;
    println!(
        "{:<13} {:>3} {:>3} {:>8} {:>8} {:>6}",
        "method", "k", "d", "fdp", "power", "c_med"
    );
    for s in &out.summaries {
        println!(
            "{:<13} {:>3} {:>3} {:>8.3} {:>8.3} {:>6}",
            s.method, s.k, s.d, s.mean_fdp, s.mean_power, s.c_star_med
        );
    }
    let dir = args.next().map(PathBuf::from).or(config.output.clone());
    if let Some(dir) = dir {
        write_outputs(&out, &config.methods, &dir)?;
        println!("csv written to {}", dir.display());
    }
    Ok(())
}
