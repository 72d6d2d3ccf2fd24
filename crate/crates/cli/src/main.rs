use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use costly::env::Environment;
use costly::mcts::VisitLog;
use costly::metrics::{self, ResultRow, RESULTS_HEADER};
use costly::net::{Checkpoint, Network};
use costly::rules::{self, CountMode, RuleOptions, DEFAULT_BINS, DEFAULT_MIN_VISITS};

mod config;
mod pipeline;

use config::RunArgs;

#[derive(Debug, Parser)]
#[command(name = "costly", version, about = "Cost-sensitive feature acquisition with actor-critic and tree search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train actor-critic, refine with tree search, write all artifacts
    Train(RunArgs),
    /// Evaluate a checkpoint of a finished run on one of its splits
    Evaluate(EvaluateArgs),
    /// Repeat split, train and evaluate over seeds and lambdas
    Benchmark(BenchmarkArgs),
    /// Aggregate a visit log into a rule tree
    Rules(RulesArgs),
    /// Summarize a checkpoint file
    InspectCheckpoint(InspectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, clap::Args)]
struct EvaluateArgs {
    /// Run directory written by `train`
    #[arg(long)]
    run: PathBuf,
    /// Checkpoint to evaluate; the run's final checkpoint by default
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
}

#[derive(Debug, clap::Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Seeds 1..=N
    #[arg(long, default_value_t = 20)]
    repeats: u64,
    /// Comma-separated lambdas; the run's lambda when omitted
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Count {
    Trajectories,
    Simulations,
}

#[derive(Debug, clap::Args)]
struct RulesArgs {
    /// Visit log (`visits.jsonl`)
    #[arg(long)]
    visits: PathBuf,
    /// Output directory for rules.dot and rules.json
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_VISITS)]
    min_visits: u64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// What a visit is: one trajectory, or the root visit count of each decision
    #[arg(long, value_enum, default_value = "trajectories")]
    count: Count,
}

#[derive(Debug, clap::Args)]
struct InspectArgs {
    checkpoint: PathBuf,
}

fn train(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let rep = pipeline::run_train(&cfg)?;
    println!(
        "test accuracy {:.4}  mean cost {:.4}  objective {:.4}  (a2c: {:.4} / {:.4})",
        rep.test.accuracy, rep.test.mean_cost, rep.test.objective, rep.a2c_test.accuracy, rep.a2c_test.mean_cost
    );
    println!("artifacts in {}", cfg.output.display());
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let manifest = pipeline::read_manifest(&args.run)?;
    let cfg = manifest.config.clone();
    let p = pipeline::prepare(&cfg)?;
    if p.train.costs() != manifest.costs.as_slice() || p.norm != manifest.norm {
        bail!("dataset no longer matches the run manifest");
    }
    let ck = args.checkpoint.clone().unwrap_or_else(|| args.run.join(pipeline::CHECKPOINT));
    let net = Network::load(&ck).with_context(|| format!("loading {}", ck.display()))?;
    let ds = match args.split {
        Split::Train => &p.train,
        Split::Val => &p.val,
        Split::Test => &p.test,
    };
    let report = metrics::evaluate(&net, &Environment::new(ds, p.reward, cfg.t_max)?)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    lambda: f64,
    runs: usize,
    failures: Vec<(u64, String)>,
    accuracy: (f64, f64),
    mean_cost: (f64, f64),
    auc: Option<(f64, f64)>,
    objective: (f64, f64),
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    if args.repeats == 0 {
        bail!("--repeats must be >= 1");
    }
    let base = args.run.resolve()?;
    let lambdas = if args.lambdas.is_empty() { vec![base.lambda] } else { args.lambdas.clone() };
    let label = pipeline::dataset_label(&base);
    let mut csv = format!("{RESULTS_HEADER}\n");
    let mut summaries = Vec::new();
    for &lambda in &lambdas {
        let mut rows: Vec<ResultRow> = Vec::new();
        let mut failures = Vec::new();
        for seed in 1..=args.repeats {
            let mut cfg = base.clone();
            cfg.lambda = lambda;
            cfg.seed = seed;
            cfg.a2c.seed = seed;
            cfg.mcts.seed = seed;
            let outcome = pipeline::prepare(&cfg).and_then(|p| {
                let t = pipeline::train(&cfg, &p)?;
                Ok(pipeline::report(&cfg, &p, &t)?.test)
            });
            match outcome {
                Ok(report) => {
                    let row = ResultRow::new(&label, seed, &report);
                    csv.push_str(&row.to_csv_line());
                    csv.push('\n');
                    rows.push(row);
                }
                Err(e) => {
                    eprintln!("lambda {lambda} seed {seed} failed: {e:#}");
                    failures.push((seed, format!("{e:#}")));
                }
            }
        }
        if rows.is_empty() {
            bail!("every run at lambda {lambda} failed");
        }
        let col = |f: fn(&ResultRow) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
        let aucs: Vec<f64> = rows.iter().filter_map(|r| r.auc).collect();
        summaries.push(Summary {
            lambda,
            runs: rows.len(),
            failures,
            accuracy: col(|r| r.accuracy),
            mean_cost: col(|r| r.mean_cost),
            auc: (!aucs.is_empty()).then(|| mean_std(&aucs)),
            objective: col(|r| r.objective),
        });
    }

    let dir = &base.output;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join(pipeline::RESULTS), csv)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summaries)? + "\n")?;

    println!("{:>8} {:>5} {:>17} {:>17} {:>17} {:>17}", "lambda", "runs", "accuracy", "mean_cost", "auc", "objective");
    let pm = |(m, s): (f64, f64)| format!("{m:.4}±{s:.4}");
    for s in &summaries {
        println!(
            "{:>8} {:>5} {:>17} {:>17} {:>17} {:>17}",
            s.lambda,
            s.runs,
            pm(s.accuracy),
            pm(s.mean_cost),
            s.auc.map_or("-".to_string(), pm),
            pm(s.objective)
        );
    }
    Ok(())
}

fn extract_rules(args: &RulesArgs) -> Result<()> {
    let text = fs::read_to_string(&args.visits).with_context(|| format!("reading {}", args.visits.display()))?;
    let log = VisitLog::from_jsonl(&text)?;
    let opts = RuleOptions {
        bins: args.bins,
        min_visits: args.min_visits,
        mode: match args.count {
            Count::Trajectories => CountMode::Trajectories,
            Count::Simulations => CountMode::Simulations,
        },
    };
    let tree = rules::aggregate(&log, &opts)?;
    fs::create_dir_all(&args.output)?;
    fs::write(args.output.join("rules.dot"), tree.to_dot())?;
    fs::write(args.output.join("rules.json"), tree.to_text()?)?;
    if let Some(w) = &tree.warning {
        eprintln!("warning: {w}");
    }
    println!("{} rule nodes written to {}", tree.node_count(), args.output.display());
    Ok(())
}

#[derive(Serialize)]
struct BlockSummary {
    name: &'static str,
    len: usize,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

fn inspect(args: &InspectArgs) -> Result<()> {
    let text = fs::read_to_string(&args.checkpoint).with_context(|| format!("reading {}", args.checkpoint.display()))?;
    let ck = Checkpoint::from_json(&text)?;
    let net = Network::from_checkpoint(ck.clone())?;
    let blocks: Vec<BlockSummary> = net
        .shape()
        .blocks()
        .into_iter()
        .map(|(name, range)| {
            let xs = &net.params()[range];
            let (mean, std) = mean_std(xs);
            BlockSummary {
                name,
                len: xs.len(),
                mean,
                std,
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let summary = serde_json::json!({
        "format": ck.format,
        "version": ck.version,
        "shape": ck.shape,
        "seed": ck.seed,
        "param_count": net.params().len(),
        "l2_norm": net.params().iter().map(|w| w * w).sum::<f64>().sqrt(),
        "blocks": blocks,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Rules(a) => extract_rules(a),
        Command::InspectCheckpoint(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
