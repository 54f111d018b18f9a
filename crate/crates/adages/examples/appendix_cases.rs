//! Machine-wise FDP and power next to every rule's aggregate, for one of the
//! illustration cases.
//!
//! `cargo run --release --example appendix_cases -- [k] [d] [reps]`

use adages::harness::{run_appendix_cases, APPENDIX_CASES};

fn bar(v: f64) -> String {
    "#".repeat((v * 40.0).round() as usize)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let case = match args.as_slice() {
        [k, d, ..] => (*k, *d),
        _ => APPENDIX_CASES[0],
    };
    let reps = args.get(2).copied().unwrap_or(20);
    let (_, out) = run_appendix_cases(0.2, &[case], reps, 3, 1)?.remove(0);
    let k = case.0;

    println!("k={} d={} over {reps} reps (q = 0.2)", case.0, case.1);
    println!("{:<13} {:>6}  {:<40} {:>6}", "", "FDR", "", "power");
    for i in 0..k {
        let rows: Vec<_> = out.records.iter().filter(|r| !r.failed()).collect();
        let f = rows.iter().map(|r| r.machine_fdp[i]).sum::<f64>() / rows.len() as f64;
        let p = rows.iter().map(|r| r.machine_tpp[i]).sum::<f64>() / rows.len() as f64;
        println!("{:<13} {f:>6.3}  {:<40} {p:>6.3}", format!("machine {i}"), bar(f));
    }
    for s in &out.summaries {
        println!(
            "{:<13} {:>6.3}  {:<40} {:>6.3}",
            s.method,
            s.mean_fdp,
            bar(s.mean_fdp),
            s.mean_power
        );
    }
    Ok(())
}
