//! Seeded Monte-Carlo sweeps over the number of machines or the dimension.
//!
//! A trial generates one linear-model instance, splits it across `k`
//! machines, runs the knockoff selector on every shard and aggregates the
//! resulting sets under each configured method. Trial seeds are derived from
//! `(seed, sweep value, rep)`, so output depends only on the configuration,
//! never on the number of workers.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{aggregate, vote_counts, AggregationError, AggregationRule};
use crate::datagen::{gen_instance, partition, DataGenError, LinearModelSpec};
use crate::knockoff::{check_level, knockoff_plus_threshold, machine_statistics, KnockoffError, SelectorSettings};
use crate::metrics::{
    diff_count, fdp, intersection_count_holds, shrinkage_bound_holds, summarize, tpp, union_count_holds,
    vote_mass_bound_holds, MethodRecord, MetricsError, SweepSummary, TrialRecord,
};
use crate::seed::{derive_seed, rng_from_seed};
use crate::selection::{SelectionError, SelectionSet};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    DataGen(#[from] DataGenError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Level(#[from] KnockoffError),
    #[error("{check} violated in trial with seed {seed} (sweep value {value}, rep {rep})")]
    Invariant {
        check: &'static str,
        seed: u64,
        value: usize,
        rep: usize,
    },
    #[error("selections file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// An aggregation rule, or the split-level union baseline that runs every
/// machine at `q/k` and takes the union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Rule(AggregationRule),
    XieSplit,
}

impl FromStr for Method {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "xie_split" | "xie-split" | "xie" => Ok(Method::XieSplit),
            other => other.parse().map(Method::Rule),
        }
    }
}

impl TryFrom<String> for Method {
    type Error = AggregationError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Rule(rule) => write!(f, "{}", rule.name()),
            Method::XieSplit => f.write_str("xie_split"),
        }
    }
}

/// Every method, in CSV column order.
pub fn default_methods() -> Vec<Method> {
    vec![
        Method::Rule(AggregationRule::Union),
        Method::Rule(AggregationRule::Intersection),
        Method::Rule(AggregationRule::Median),
        Method::Rule(AggregationRule::Adages),
        Method::Rule(AggregationRule::AdagesModified),
        Method::XieSplit,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    K,
    D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<usize>,
}

fn default_methods_serde() -> Vec<Method> {
    default_methods()
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Instance template; the swept field is overwritten per point and its
    /// `seed` is replaced by the derived trial seed.
    pub base: LinearModelSpec,
    pub sweep: Sweep,
    #[serde(default = "default_methods_serde")]
    pub methods: Vec<Method>,
    pub q: f64,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "one")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.sweep.values.is_empty() {
            return Err(HarnessError::Config("sweep has no values".into()));
        }
        if self.reps == 0 {
            return Err(HarnessError::Config("reps must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods configured".into()));
        }
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        check_level(self.q)?;
        for &value in &self.sweep.values {
            self.spec_for(value, 0).validate()?;
        }
        Ok(())
    }

    fn spec_for(&self, value: usize, seed: u64) -> LinearModelSpec {
        let mut spec = self.base.clone();
        match self.sweep.variable {
            SweepVariable::K => spec.k = value,
            SweepVariable::D => spec.d = value,
        }
        spec.seed = seed;
        spec
    }

    pub fn trial_seed(&self, value: usize, rep: usize) -> u64 {
        derive_seed(&[self.seed, value as u64, rep as u64])
    }
}

/// Machine selections at level `q` and at the split level `q/k`.
struct MachineResults {
    at_q: Vec<SelectionSet>,
    at_split: Vec<SelectionSet>,
    failures: usize,
}

fn run_machines(spec: &LinearModelSpec, q: f64, seed: u64) -> Result<(SelectionSet, MachineResults), HarnessError> {
    let mut rng = rng_from_seed(seed);
    let instance = gen_instance(spec, &mut rng)?;
    let shards = partition(&instance.x, &instance.y, spec.k)?;
    let settings = SelectorSettings::default();
    let split_q = q / spec.k as f64;
    let mut results = MachineResults {
        at_q: Vec::with_capacity(spec.k),
        at_split: Vec::with_capacity(spec.k),
        failures: 0,
    };
    for shard in &shards {
        let mut machine_rng = rng_from_seed(derive_seed(&[seed, shard.machine_id as u64]));
        match machine_statistics(shard, &settings, &mut machine_rng) {
            Ok(stats) => {
                results.at_q.push(knockoff_plus_threshold(&stats.w, q).selected);
                results
                    .at_split
                    .push(knockoff_plus_threshold(&stats.w, split_q).selected);
            }
            Err(_) => results.failures += 1,
        }
    }
    Ok((instance.truth.support, results))
}

/// Runs one repetition at one sweep point.
pub fn run_trial(config: &ExperimentConfig, value: usize, rep: usize) -> Result<TrialRecord, HarnessError> {
    let seed = config.trial_seed(value, rep);
    let spec = config.spec_for(value, seed);
    let (truth, machines) = run_machines(&spec, config.q, seed)?;
    let mut record = TrialRecord {
        k: spec.k,
        d: spec.d,
        n: spec.n,
        s: spec.s,
        rep,
        seed,
        truth,
        machine_sets: Vec::new(),
        machine_fdp: Vec::new(),
        machine_tpp: Vec::new(),
        methods: Vec::new(),
        c_star: 0,
        c_tilde: 0,
        c0: 0,
        diff: 0,
        failures: machines.failures,
        shrinkage_bound: None,
    };
    if record.failed() {
        return Ok(record);
    }
    let truth = &record.truth;
    let sets = machines.at_q;
    let violation = |check| HarnessError::Invariant {
        check,
        seed,
        value,
        rep,
    };

    let profile = vote_counts(&sets, spec.d)?;
    let union = aggregate(&sets, AggregationRule::Union)?;
    let intersection = aggregate(&sets, AggregationRule::Intersection)?;
    let adages = aggregate(&sets, AggregationRule::Adages)?;
    let modified = aggregate(&sets, AggregationRule::AdagesModified)?;

    if !union_count_holds(&sets, &union.selected, truth) {
        return Err(violation("union false-discovery count bound"));
    }
    if !intersection_count_holds(&sets, &intersection.selected, truth) {
        return Err(violation("intersection false-discovery count bound"));
    }
    for out in [&adages, &modified] {
        if !vote_mass_bound_holds(&profile, truth, out.threshold_used, &out.selected) {
            return Err(violation("power-shrinkage count inequality"));
        }
    }

    for method in &config.methods {
        let outcome = match method {
            Method::Rule(rule) => aggregate(&sets, *rule)?,
            Method::XieSplit => aggregate(&machines.at_split, AggregationRule::Union)?,
        };
        record.methods.push(MethodRecord {
            method: method.to_string(),
            fdp: fdp(&outcome.selected, truth)?,
            power: tpp(&outcome.selected, truth)?,
            outcome,
        });
    }
    record.machine_fdp = sets.iter().map(|s| fdp(s, truth)).collect::<Result<_, _>>()?;
    record.machine_tpp = sets.iter().map(|s| tpp(s, truth)).collect::<Result<_, _>>()?;
    record.c_star = adages.threshold_used;
    record.c_tilde = modified.threshold_used;
    record.c0 = adages.c0;
    record.diff = diff_count(&union.selected, &adages.selected, truth)?;
    record.shrinkage_bound = shrinkage_bound_holds(
        tpp(&adages.selected, truth)?,
        &record.machine_tpp,
        adages.threshold_used,
        adages.selected.size(),
        truth.size(),
        fdp(&adages.selected, truth)?,
    );
    record.machine_sets = sets;
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<SweepSummary>,
}

impl SweepOutput {
    pub fn summary(&self, method: &str, k: usize, d: usize) -> Option<&SweepSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.k == k && s.d == d)
    }

    pub fn failed_trials(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }
}

/// Runs every `(value, rep)` pair on a pool of `config.workers` threads.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput, HarnessError> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = config
        .sweep
        .values
        .iter()
        .flat_map(|&v| (0..config.reps).map(move |r| (v, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(value, rep)| run_trial(config, value, rep))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summaries = if records.iter().all(|r| r.failed()) {
        Vec::new()
    } else {
        summarize(&records)?
    };
    Ok(SweepOutput { records, summaries })
}

fn opt(value: f64) -> String {
    value.to_string()
}

/// Trial-level CSV: one row per trial and method.
pub fn write_trials_csv<W: Write>(records: &[TrialRecord], methods: &[Method], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method", "k", "d", "n", "s", "rep", "seed", "fdp", "power", "c_star", "c0", "agg_size", "failures",
    ])?;
    for r in records {
        for method in methods {
            let name = method.to_string();
            let mut row = vec![
                name.clone(),
                r.k.to_string(),
                r.d.to_string(),
                r.n.to_string(),
                r.s.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
            ];
            match r.method(&name) {
                Some(m) => row.extend([
                    opt(m.fdp),
                    opt(m.power),
                    m.outcome.threshold_used.to_string(),
                    m.outcome.c0.to_string(),
                    m.outcome.selected.size().to_string(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            row.push(r.failures.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summaries: &[SweepSummary], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        w.serialize(s)?;
    }
    if summaries.is_empty() {
        w.write_record([
            "method",
            "k",
            "d",
            "mean_fdp",
            "mean_power",
            "reps",
            "c_star_min",
            "c_star_q25",
            "c_star_med",
            "c_star_q75",
            "c_star_max",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Machine-wise FDP/power per trial, the raw material for bar plots of
/// each machine next to the aggregates.
pub fn write_machines_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "d", "rep", "seed", "machine", "fdp", "power", "size"])?;
    for r in records.iter().filter(|r| !r.failed()) {
        for (i, set) in r.machine_sets.iter().enumerate() {
            w.write_record([
                r.k.to_string(),
                r.d.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
                i.to_string(),
                opt(r.machine_fdp[i]),
                opt(r.machine_tpp[i]),
                set.size().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Bytes of the trial CSV, used for determinism checks.
pub fn trials_csv_bytes(records: &[TrialRecord], methods: &[Method]) -> Result<Vec<u8>, HarnessError> {
    let mut buf = Vec::new();
    write_trials_csv(records, methods, &mut buf)?;
    Ok(buf)
}

/// Writes `trials.csv`, `summary.csv` and `machines.csv` into `dir`.
pub fn write_outputs(output: &SweepOutput, methods: &[Method], dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_trials_csv(&output.records, methods, fs::File::create(dir.join("trials.csv"))?)?;
    write_summary_csv(&output.summaries, fs::File::create(dir.join("summary.csv"))?)?;
    write_machines_csv(&output.records, fs::File::create(dir.join("machines.csv"))?)?;
    Ok(())
}

/// The four `(k, d)` illustration cases.
pub const APPENDIX_CASES: [(usize, usize); 4] = [(5, 20), (5, 80), (10, 20), (10, 80)];

/// One-point sweep for an illustration case: `n = 1000`, `s = d/4`.
pub fn appendix_config(q: f64, case: (usize, usize), reps: usize, seed: u64) -> ExperimentConfig {
    let (k, d) = case;
    ExperimentConfig {
        base: LinearModelSpec {
            n: 1000,
            d,
            s: d / 4,
            rho: 0.25,
            amplitude: 2.0,
            k,
            seed: 0,
        },
        sweep: Sweep {
            variable: SweepVariable::K,
            values: vec![k],
        },
        methods: default_methods(),
        q,
        reps,
        seed,
        output: None,
        workers: 1,
    }
}

/// Each requested case with its sweep output.
pub type CaseOutputs = Vec<((usize, usize), SweepOutput)>;

pub fn run_appendix_cases(
    q: f64,
    cases: &[(usize, usize)],
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<CaseOutputs, HarnessError> {
    if cases.is_empty() {
        return Err(HarnessError::Config("no cases requested".into()));
    }
    cases
        .iter()
        .map(|&case| {
            if !APPENDIX_CASES.contains(&case) {
                return Err(HarnessError::Config(format!(
                    "unknown case (k={}, d={})",
                    case.0, case.1
                )));
            }
            let mut config = appendix_config(q, case, reps, seed);
            config.workers = workers;
            Ok((case, run_sweep(&config)?))
        })
        .collect()
}

/// Parses `all` or a list like `5x20,10x80`.
pub fn parse_cases(spec: &str) -> Result<Vec<(usize, usize)>, HarnessError> {
    if spec.trim() == "all" {
        return Ok(APPENDIX_CASES.to_vec());
    }
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (k, d) = part
                .trim()
                .split_once(['x', ':'])
                .ok_or_else(|| HarnessError::Config(format!("case {part:?} is not KxD")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| HarnessError::Config(format!("case {part:?} is not KxD")))
            };
            Ok((parse(k)?, parse(d)?))
        })
        .collect()
}

/// One machine's line of a selections file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineSelection {
    pub machine_id: usize,
    pub set: SelectionSet,
}

/// Reads `machine_id<TAB>d<TAB>i,j,...` lines. Blank lines and `#` comments
/// are skipped; every line must agree on `d` and machine ids are unique.
pub fn parse_selections(text: &str) -> Result<Vec<MachineSelection>, HarnessError> {
    let mut out: Vec<MachineSelection> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        let err = |message: String| HarnessError::Parse { line: line_no, message };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 && fields.len() != 2 {
            return Err(err(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let machine_id = fields[0].trim().parse().map_err(|_| err("bad machine id".into()))?;
        let d: usize = fields[1].trim().parse().map_err(|_| err("bad dimension".into()))?;
        let indices = match fields.get(2).map(|f| f.trim()) {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| err(format!("bad index {v:?}"))))
                .collect::<Result<_, _>>()?,
        };
        let set = SelectionSet::new(d, indices).map_err(|e| err(e.to_string()))?;
        if let Some(first) = out.first() {
            if first.set.dimension() != d {
                return Err(err(SelectionError::DimensionMismatch {
                    expected: first.set.dimension(),
                    found: d,
                }
                .to_string()));
            }
        }
        if out.iter().any(|m| m.machine_id == machine_id) {
            return Err(err(format!("machine {machine_id} listed twice")));
        }
        out.push(MachineSelection { machine_id, set });
    }
    if out.is_empty() {
        return Err(HarnessError::Parse {
            line: 0,
            message: "no selections".into(),
        });
    }
    Ok(out)
}

pub fn format_selections(selections: &[MachineSelection]) -> String {
    selections
        .iter()
        .map(|m| format!("{}\t{}\t{}\n", m.machine_id, m.set.dimension(), m.set.to_index_list()))
        .collect()
}
