//! A coordinator on localhost and `k` worker threads, each reporting its
//! own selection over TCP. The served aggregate is checked against a direct
//! library call.
//!
//! `cargo run --example coordinator_session`

use std::thread;
use std::time::Duration;

use adages::aggregation::{aggregate, AggregationRule};
use adages::selection::SelectionSet;
use adages::service::{spawn_server, Client, CoordinatorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let server = spawn_server("127.0.0.1:0", CoordinatorConfig::default())?;
    let addr = server.addr();
    println!("coordinator on {addr}");

    let d = 15;
    let sets: Vec<SelectionSet> = vec![
        SelectionSet::new(d, [0, 1, 2, 3, 8])?,
        SelectionSet::new(d, [0, 1, 2, 3, 11])?,
        SelectionSet::new(d, [0, 1, 2, 14])?,
        SelectionSet::new(d, [0, 1, 3, 8])?,
    ];
    let session = Client::connect(addr)?.open(sets.len(), d, AggregationRule::Adages)?;
    println!("session {session}");

    let workers: Vec<_> = sets
        .iter()
        .cloned()
        .enumerate()
        .map(|(machine_id, set)| {
            let session = session.clone();
            thread::spawn(move || {
                let mut client = Client::connect(addr).expect("connect");
                client.report(&session, machine_id, &set).expect("report");
                client.wait_result(&session, Duration::from_secs(10)).expect("result")
            })
        })
        .collect();
    let results: Vec<_> = workers.into_iter().map(|w| w.join().expect("worker")).collect();

    let direct = aggregate(&sets, AggregationRule::Adages)?;
    for r in &results {
        assert_eq!(r.selected, direct.selected.members());
    }
    println!(
        "all {} workers received c*={} selected={:?}",
        results.len(),
        results[0].threshold_used,
        results[0].selected
    );
    server.shutdown();
    Ok(())
}
