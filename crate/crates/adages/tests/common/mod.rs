//! Shared helpers for the integration tests and the acceptance runner.
#![allow(dead_code)]

use adages::aggregation::{aggregate, vote_counts, AggregationRule};
use adages::selection::SelectionSet;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-from-the-definitions evaluation of the adaptive rules, using
/// nothing but integer arithmetic on masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Oracle {
    pub c0: usize,
    pub c_star: usize,
    pub c_tilde: usize,
    pub adages: Vec<usize>,
    pub adages_m: Vec<usize>,
}

pub fn oracle(masks: &[u64], d: usize) -> Oracle {
    let k = masks.len();
    let votes: Vec<usize> = (0..d)
        .map(|j| masks.iter().filter(|&&m| m >> j & 1 == 1).count())
        .collect();
    let total: usize = masks.iter().map(|m| m.count_ones() as usize).sum();
    let size = |c: usize| votes.iter().filter(|&&v| v >= c).count();
    let c0 = (1..=k)
        .rev()
        .find(|&c| k * size(c) >= total)
        .expect("c = 1 always qualifies");
    // eta_c as a fraction; None is infinity
    let eta = |c: usize| (c < k).then(|| (size(c) + 1, size(c + 1) + 1));
    let less = |a: Option<(usize, usize)>, b: Option<(usize, usize)>| match (a, b) {
        (Some((p, q)), Some((r, s))) => p * s < r * q,
        (Some(_), None) => true,
        _ => false,
    };
    let mut c_star = 1;
    for c in 2..=c0 {
        if less(eta(c), eta(c_star)) {
            c_star = c;
        }
    }
    let mut c_tilde = 1;
    for c in 2..=c0 {
        if c * size(c) < c_tilde * size(c_tilde) {
            c_tilde = c;
        }
    }
    let pick = |c: usize| (0..d).filter(|&j| votes[j] >= c).collect();
    Oracle {
        c0,
        c_star,
        c_tilde,
        adages: pick(c_star),
        adages_m: pick(c_tilde),
    }
}

pub fn mask_to_set(mask: u64, d: usize) -> SelectionSet {
    SelectionSet::new(d, (0..d).filter(|&j| mask >> j & 1 == 1)).unwrap()
}

/// Calls `f` on every multiset of `k` subsets of `[0, d)`, as sorted masks.
pub fn for_each_multiset(k: usize, d: usize, f: &mut impl FnMut(&[u64])) {
    fn rec(start: u64, limit: u64, buf: &mut Vec<u64>, k: usize, f: &mut impl FnMut(&[u64])) {
        if buf.len() == k {
            f(buf);
            return;
        }
        for m in start..limit {
            buf.push(m);
            rec(m, limit, buf, k, f);
            buf.pop();
        }
    }
    rec(0, 1 << d, &mut Vec::with_capacity(k), k, f);
}

/// Calls `f` on every nonincreasing vote array of length `d` with entries
/// in `[0, k]`, realized as staircase machine masks (machine `i` selects
/// `j` iff `i < m_j`).
pub fn for_each_vote_array(k: usize, d: usize, f: &mut impl FnMut(&[usize], &[u64])) {
    fn rec(max: usize, votes: &mut Vec<usize>, k: usize, d: usize, f: &mut impl FnMut(&[usize], &[u64])) {
        if votes.len() == d {
            let masks: Vec<u64> = (0..k)
                .map(|i| {
                    votes
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| i < v)
                        .map(|(j, _)| 1u64 << j)
                        .sum()
                })
                .collect();
            f(votes, &masks);
            return;
        }
        for v in (0..=max).rev() {
            votes.push(v);
            rec(v, votes, k, d, f);
            votes.pop();
        }
    }
    rec(k, &mut Vec::with_capacity(d), k, d, f);
}

/// Compares the library against the oracle on one profile; returns a
/// description of the first disagreement.
pub fn check_against_oracle(masks: &[u64], d: usize) -> Option<String> {
    let sets: Vec<SelectionSet> = masks.iter().map(|&m| mask_to_set(m, d)).collect();
    let expect = oracle(masks, d);
    let adages = aggregate(&sets, AggregationRule::Adages).unwrap();
    let modified = aggregate(&sets, AggregationRule::AdagesModified).unwrap();
    let got = Oracle {
        c0: adages.c0,
        c_star: adages.threshold_used,
        c_tilde: modified.threshold_used,
        adages: adages.selected.members().to_vec(),
        adages_m: modified.selected.members().to_vec(),
    };
    (got != expect).then(|| format!("masks {masks:?} d={d}: library {got:?} oracle {expect:?}"))
}

/// Random profile with `k ≤ max_k`, `d ≤ max_d` and per-machine inclusion
/// probabilities drawn per profile, so both sparse and dense cases appear.
pub fn random_profile(rng: &mut ChaCha8Rng, max_k: usize, max_d: usize) -> Vec<SelectionSet> {
    let k = rng.random_range(1..=max_k);
    let d = rng.random_range(1..=max_d);
    let p: f64 = rng.random();
    (0..k)
        .map(|_| SelectionSet::new(d, (0..d).filter(|_| rng.random_bool(p))).unwrap())
        .collect()
}

#[derive(Debug, Default)]
pub struct AlgebraReport {
    pub profiles: usize,
    pub checks: usize,
    pub violations: Vec<String>,
}

/// Nesting, boundary equivalences, count inequality with a random `A`,
/// `c0` properties and the range of both adaptive thresholds, on `count`
/// random profiles.
pub fn random_algebra_suite(seed: u64, count: usize, max_k: usize, max_d: usize) -> AlgebraReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AlgebraReport::default();
    for _ in 0..count {
        let sets = random_profile(&mut rng, max_k, max_d);
        let (k, d) = (sets.len(), sets[0].dimension());
        report.profiles += 1;
        let mut fail = |what: &str, ok: bool| {
            report.checks += 1;
            if !ok {
                report.violations.push(format!("{what}: {sets:?}"));
            }
        };
        let at: Vec<SelectionSet> = (1..=k)
            .map(|c| aggregate(&sets, AggregationRule::FixedThreshold(c)).unwrap().selected)
            .collect();
        for c in 1..k {
            fail("nesting", at[c].is_subset(&at[c - 1]));
        }
        let union = sets
            .iter()
            .skip(1)
            .fold(sets[0].clone(), |acc, s| acc.union(s).unwrap());
        let inter = sets
            .iter()
            .skip(1)
            .fold(sets[0].clone(), |acc, s| acc.intersection(s).unwrap());
        fail("union boundary", at[0] == union);
        fail("intersection boundary", at[k - 1] == inter);
        fail(
            "union rule",
            aggregate(&sets, AggregationRule::Union).unwrap().selected == union,
        );
        fail(
            "intersection rule",
            aggregate(&sets, AggregationRule::Intersection).unwrap().selected == inter,
        );

        let a = SelectionSet::new(d, (0..d).filter(|_| rng.random_bool(0.5))).unwrap();
        let budget: usize = sets.iter().map(|s| s.overlap(&a)).sum();
        for c in 1..=k {
            fail("count inequality", c * at[c - 1].overlap(&a) <= budget);
        }

        let profile = vote_counts(&sets, d).unwrap();
        let adages = aggregate(&sets, AggregationRule::Adages).unwrap();
        let modified = aggregate(&sets, AggregationRule::AdagesModified).unwrap();
        let c0 = adages.c0;
        fail("c0 >= 1", c0 >= 1);
        fail("c0 meets mean size", k * at[c0 - 1].size() >= profile.total_votes());
        fail("c* in [1, c0]", (1..=c0).contains(&adages.threshold_used));
        fail("c~ in [1, c0]", (1..=c0).contains(&modified.threshold_used));
        if let Some(lb) = &adages.lambda_bar {
            fail("lambda_bar positive", *lb > BigRational::zero());
        }
    }
    report
}

/// One machine on its own data: `n` rows, `d` AR(0.25) columns, `s` signals
/// of amplitude 2 (`s = 0` gives pure-noise `y`). Returns the selection and
/// the true support.
pub fn single_machine_run(seed: u64, n: usize, d: usize, s: usize, q: f64) -> (SelectionSet, SelectionSet) {
    use adages::datagen::{ar1_design, gen_instance, LinearModelSpec};
    use adages::knockoff::{machine_select, DatasetShard, SelectorSettings};
    use adages::seed::{derive_seed, rng_from_seed};
    use nalgebra::DVector;
    use rand_distr::StandardNormal;

    let mut rng = rng_from_seed(seed);
    let (x, y, truth) = if s == 0 {
        let x = ar1_design(n, d, 0.25, &mut rng);
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (x, y, SelectionSet::empty(d).unwrap())
    } else {
        let spec = LinearModelSpec {
            n,
            d,
            s,
            rho: 0.25,
            amplitude: 2.0,
            k: 1,
            seed,
        };
        let inst = gen_instance(&spec, &mut rng).unwrap();
        (inst.x, inst.y, inst.truth.support)
    };
    let shard = DatasetShard::new(x, y, 0).unwrap();
    let selected = machine_select(
        &shard,
        q,
        &SelectorSettings::default(),
        &mut rng_from_seed(derive_seed(&[seed, 1])),
    )
    .unwrap();
    (selected, truth)
}

#[derive(Debug, Default)]
pub struct SessionReport {
    pub sessions: usize,
    pub clients: usize,
    /// Sessions whose clients did not all receive byte-identical selections.
    pub disagreements: usize,
    /// Sessions whose result differs from aggregating the sets locally.
    pub wrong_results: usize,
    pub duplicates_rejected: usize,
    pub mismatches_rejected: usize,
    pub errors: Vec<String>,
}

/// Opens `sessions` sessions on a running coordinator and drives each with
/// `k ∈ [2, 8]` concurrent clients. Every client reports its set, retries
/// with a different set and with the wrong dimension, then waits for the
/// result.
pub fn exercise_sessions(addr: std::net::SocketAddr, sessions: usize, seed: u64) -> SessionReport {
    use adages::service::{Client, ErrorCode, Message, ReportMessage};
    use std::thread;
    use std::time::Duration;

    enum Outcome {
        Selected(Vec<u8>),
        Failed(String),
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plans: Vec<(usize, usize, Vec<SelectionSet>)> = (0..sessions)
        .map(|_| {
            let k = rng.random_range(2..=8);
            let d = rng.random_range(5..=40);
            let p = rng.random_range(0.05..0.6);
            let sets = (0..k)
                .map(|_| SelectionSet::new(d, (0..d).filter(|_| rng.random_bool(p))).unwrap())
                .collect();
            (k, d, sets)
        })
        .collect();

    let workers: Vec<_> = plans
        .into_iter()
        .map(|(k, d, sets)| {
            thread::spawn(move || {
                let id = Client::connect(addr)
                    .and_then(|mut c| c.open(k, d, AggregationRule::Adages))
                    .map_err(|e| e.to_string())?;
                let clients: Vec<_> = sets
                    .iter()
                    .cloned()
                    .enumerate()
                    .map(|(machine, set)| {
                        let id = id.clone();
                        thread::spawn(move || -> (Outcome, bool, bool) {
                            let run = || -> Result<(Vec<u8>, bool, bool), String> {
                                let mut client = Client::connect(addr).map_err(|e| e.to_string())?;
                                client.report(&id, machine, &set).map_err(|e| e.to_string())?;
                                let other = set.complement();
                                let dup = client
                                    .request(&Message::Report(ReportMessage {
                                        session_id: id.clone(),
                                        machine_id: machine,
                                        d,
                                        selected: other.members().to_vec(),
                                    }))
                                    .map_err(|e| e.to_string())?;
                                let wide = client
                                    .request(&Message::Report(ReportMessage {
                                        session_id: id.clone(),
                                        machine_id: machine,
                                        d: d + 1,
                                        selected: set.members().to_vec(),
                                    }))
                                    .map_err(|e| e.to_string())?;
                                let result =
                                    client.wait_result(&id, Duration::from_secs(30)).map_err(|e| e.to_string())?;
                                let is = |m: &Message, want: ErrorCode| matches!(m, Message::Error { code, .. } if *code == want);
                                Ok((
                                    serde_json::to_vec(&result.selected).unwrap(),
                                    is(&dup, ErrorCode::Duplicate),
                                    is(&wide, ErrorCode::DimensionMismatch),
                                ))
                            };
                            match run() {
                                Ok((bytes, dup, wide)) => (Outcome::Selected(bytes), dup, wide),
                                Err(e) => (Outcome::Failed(e), false, false),
                            }
                        })
                    })
                    .collect();
                let outcomes: Vec<(Outcome, bool, bool)> =
                    clients.into_iter().map(|h| h.join().expect("client thread")).collect();
                Ok::<_, String>((sets, outcomes))
            })
        })
        .collect();

    let mut report = SessionReport::default();
    for worker in workers {
        report.sessions += 1;
        let (sets, outcomes) = match worker.join().expect("session thread") {
            Ok(v) => v,
            Err(e) => {
                report.errors.push(e);
                continue;
            }
        };
        let expected =
            serde_json::to_vec(aggregate(&sets, AggregationRule::Adages).unwrap().selected.members()).unwrap();
        let mut seen: Vec<Vec<u8>> = Vec::new();
        for (outcome, dup, wide) in outcomes {
            report.clients += 1;
            report.duplicates_rejected += usize::from(dup);
            report.mismatches_rejected += usize::from(wide);
            match outcome {
                Outcome::Selected(bytes) => seen.push(bytes),
                Outcome::Failed(e) => report.errors.push(e),
            }
        }
        if seen.len() != sets.len() || seen.iter().any(|b| *b != seen[0]) {
            report.disagreements += 1;
        } else if seen[0] != expected {
            report.wrong_results += 1;
        }
    }
    report
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A sweep small enough for quick tests.
pub fn small_config(values: Vec<usize>, reps: usize, seed: u64) -> adages::harness::ExperimentConfig {
    use adages::datagen::LinearModelSpec;
    use adages::harness::{default_methods, ExperimentConfig, Sweep, SweepVariable};
    ExperimentConfig {
        base: LinearModelSpec {
            n: 400,
            d: 12,
            s: 4,
            rho: 0.25,
            amplitude: 2.0,
            k: 2,
            seed: 0,
        },
        sweep: Sweep {
            variable: SweepVariable::K,
            values,
        },
        methods: default_methods(),
        q: 0.2,
        reps,
        seed,
        output: None,
        workers: 1,
    }
}
