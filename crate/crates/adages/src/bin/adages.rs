use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use adages::aggregation::{aggregate, rational_to_f64, AggregationRule};
use adages::harness::{self, ExperimentConfig};
use adages::selection::SelectionSet;
use adages::service::{self, Client, CoordinatorConfig, Message};

#[derive(Parser)]
#[command(
    name = "adages",
    version,
    about = "Adaptive aggregation of distributed feature selections"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep from a JSON config
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's `output`)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Machine-wise and aggregate results for the four illustration cases
    Appendix {
        #[arg(long, default_value_t = 0.2)]
        q: f64,
        /// `all` or a list like `5x20,10x80`
        #[arg(long, default_value = "all")]
        cases: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Aggregate a selections file (`machine_id<TAB>d<TAB>indices` per line)
    AggregateFile {
        #[arg(long, default_value = "adages")]
        rule: AggregationRule,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the aggregation coordinator
    Serve {
        #[arg(long, env = service::BIND_ENV, default_value = service::DEFAULT_BIND)]
        bind: String,
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
        #[arg(long, default_value_t = service::DEFAULT_CAPACITY)]
        capacity: usize,
    },
    /// Open a session and print its id
    Open {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "adages")]
        rule: AggregationRule,
    },
    /// Submit one machine's selection to a session
    Report {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        session: String,
        #[arg(long)]
        machine_id: usize,
        #[arg(long)]
        d: usize,
        /// Comma-separated indices; empty for no selection
        #[arg(long, default_value = "")]
        selected: String,
        /// Seconds to wait for the aggregate after reporting
        #[arg(long)]
        wait: Option<u64>,
    },
    /// Ask a session for its status or result
    Poll {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        session: String,
        #[arg(long)]
        wait: Option<u64>,
    },
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn parse_indices(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|e| format!("bad index {s:?}: {e}").into()))
        .collect()
}

fn print_json(message: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string(message)?);
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            seed,
            reps,
            workers,
        } => {
            let mut config = ExperimentConfig::from_json_file(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(reps) = reps {
                config.reps = reps;
            }
            if let Some(workers) = workers {
                config.workers = workers;
            }
            let dir = out
                .or_else(|| config.output.clone())
                .ok_or("no output directory: pass --out or set `output`")?;
            let output = harness::run_sweep(&config)?;
            harness::write_outputs(&output, &config.methods, &dir)?;
            eprintln!(
                "{} trials ({} failed) written to {}",
                output.records.len(),
                output.failed_trials(),
                dir.display()
            );
        }
        Command::Appendix {
            q,
            cases,
            out,
            reps,
            seed,
            workers,
        } => {
            let cases = harness::parse_cases(&cases)?;
            for ((k, d), output) in harness::run_appendix_cases(q, &cases, reps, seed, workers)? {
                let dir = out.join(format!("k{k}_d{d}"));
                harness::write_outputs(&output, &harness::default_methods(), &dir)?;
                eprintln!("case k={k} d={d} written to {}", dir.display());
            }
        }
        Command::AggregateFile { rule, input } => {
            let selections = harness::parse_selections(&std::fs::read_to_string(&input)?)?;
            let sets: Vec<SelectionSet> = selections.into_iter().map(|m| m.set).collect();
            let outcome = aggregate(&sets, rule)?;
            print_json(&serde_json::json!({
                "rule": outcome.rule,
                "threshold_used": outcome.threshold_used,
                "c0": outcome.c0,
                "selected": outcome.selected.members(),
                "machine_sizes": sets.iter().map(SelectionSet::size).collect::<Vec<_>>(),
                "lambda_bar": outcome.lambda_bar.as_ref().map(rational_to_f64),
                "kappa_bar": outcome.kappa_bar.as_ref().map(rational_to_f64),
            }))?;
        }
        Command::Serve {
            bind,
            timeout_secs,
            capacity,
        } => {
            eprintln!("listening on {bind}");
            service::serve(
                bind.as_str(),
                CoordinatorConfig {
                    timeout: Duration::from_secs(timeout_secs),
                    capacity,
                },
            )?;
        }
        Command::Open { addr, k, d, rule } => {
            println!("{}", Client::connect(addr.as_str())?.open(k, d, rule)?);
        }
        Command::Report {
            addr,
            session,
            machine_id,
            d,
            selected,
            wait,
        } => {
            let set = SelectionSet::new(d, parse_indices(&selected)?)?;
            let mut client = Client::connect(addr.as_str())?;
            let reply = client.report(&session, machine_id, &set)?;
            match (reply, wait) {
                (Message::Ack { .. }, Some(secs)) => {
                    print_json(&client.wait_result(&session, Duration::from_secs(secs))?)?
                }
                (reply, _) => print_json(&reply)?,
            }
        }
        Command::Poll { addr, session, wait } => {
            let mut client = Client::connect(addr.as_str())?;
            match wait {
                Some(secs) => print_json(&client.wait_result(&session, Duration::from_secs(secs))?)?,
                None => print_json(&client.poll(&session)?)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
