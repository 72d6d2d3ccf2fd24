use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use costly::a2c;
use costly::data::{self, Dataset, NormStats, SplitSpec};
use costly::env::{imbalance_ratio, Environment, RewardConfig};
use costly::mcts::{self, IterationLog, VISIT_LOG_SCHEMA};
use costly::metrics::{self, EvalReport, ResultRow, RESULTS_HEADER};
use costly::net::{Network, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
use costly::rules::RULES_SCHEMA;
use costly::seed;

use crate::config::{CostSource, Delta, RunConfig};

pub const MANIFEST: &str = "manifest.json";
pub const A2C_LOG: &str = "a2c_log.jsonl";
pub const MCTS_LOG: &str = "mcts_log.jsonl";
pub const A2C_CHECKPOINT: &str = "checkpoint_a2c.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const VISITS: &str = "visits.jsonl";
pub const REPORT: &str = "report.json";
pub const RESULTS: &str = "results.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub costly: String,
    pub checkpoint_format: String,
    pub checkpoint_version: u32,
    pub visit_log_schema: u32,
    pub rules_schema: u32,
}

impl Versions {
    fn current() -> Self {
        Self {
            costly: env!("CARGO_PKG_VERSION").to_string(),
            checkpoint_format: CHECKPOINT_FORMAT.to_string(),
            checkpoint_version: CHECKPOINT_VERSION,
            visit_log_schema: VISIT_LOG_SCHEMA,
            rules_schema: RULES_SCHEMA,
        }
    }
}

/// Sub-stream seeds actually used, for the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub global: u64,
    pub split: u64,
    pub costs: u64,
    pub unbalance: u64,
    pub init: u64,
    pub episodes: u64,
    pub mcts: u64,
}

impl Seeds {
    fn new(global: u64) -> Self {
        Self {
            global,
            split: seed::substream(global, seed::SPLIT),
            costs: seed::substream(global, seed::COSTS),
            unbalance: seed::substream(global, "unbalance"),
            init: seed::substream(global, seed::INIT),
            episodes: seed::substream(global, seed::EPISODES),
            mcts: seed::substream(global, seed::MCTS),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub versions: Versions,
    pub config: RunConfig,
    pub seeds: Seeds,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub costs: Vec<f64>,
    pub norm: NormStats,
    pub reward: RewardConfig,
    pub t_max: usize,
    pub rows: [usize; 3],
}

pub struct Prepared {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub norm: NormStats,
    pub reward: RewardConfig,
    pub seeds: Seeds,
}

impl Prepared {
    pub fn env<'a>(&self, ds: &'a Dataset, cfg: &RunConfig) -> Result<Environment<'a>> {
        Ok(Environment::new(ds, self.reward, cfg.t_max)?)
    }
}

fn read_cost_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading cost file {}", path.display()))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad cost '{t}' in {}", path.display())))
        .collect()
}

fn class_index(ds: &Dataset, name: &str) -> Result<usize> {
    ds.class_names()
        .iter()
        .position(|c| c == name)
        .with_context(|| format!("class '{name}' not found; classes are {:?}", ds.class_names()))
}

fn minority_of(ds: &Dataset, cfg: &RunConfig) -> Result<usize> {
    match &cfg.minority_class {
        Some(name) => class_index(ds, name),
        None => {
            let counts = ds.class_counts();
            Ok(if counts[1] < counts[0] { 1 } else { 0 })
        }
    }
}

/// Loads, costs, optionally unbalances, splits and normalizes the dataset.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let seeds = Seeds::new(cfg.seed);
    let path = cfg.dataset_path()?;
    let mut ds = data::load_csv(path, &cfg.label_column).with_context(|| format!("loading {}", path.display()))?;
    ds = match &cfg.costs {
        CostSource::Dataset => ds,
        CostSource::Random => {
            let [lo, hi] = cfg.cost_range;
            let costs = data::assign_random_costs(ds.n_features(), lo, hi, seeds.costs)?;
            ds.with_costs(costs)?
        }
        CostSource::File(p) => ds.with_costs(read_cost_file(p)?)?,
    };
    if let Some(ratio) = cfg.minority_ratio {
        let minority = minority_of(&ds, cfg)?;
        ds = data::make_unbalanced(&ds, minority, ratio, seeds.unbalance)?;
    }
    let [tr, va, te] = cfg.split;
    let (train, val, test) = data::split(&ds, &SplitSpec::new(tr, va, te, seeds.split)?)?;
    let (train, rest, norm) = data::normalize(&train, &[&val, &test])?;
    let [val, test]: [Dataset; 2] = rest.try_into().map_err(|_| anyhow::anyhow!("split produced no val/test"))?;

    let binary = train.n_classes() == 2;
    let reward = match cfg.delta {
        Delta::Value(d) if d != 1.0 => {
            if !binary {
                bail!("delta weighting needs a binary dataset");
            }
            let minority = minority_of(&train, cfg)?;
            RewardConfig { lambda: cfg.lambda, delta: d, gamma: cfg.gamma, minority_class: Some(minority) }
        }
        Delta::Value(_) => RewardConfig { gamma: cfg.gamma, ..RewardConfig::balanced(cfg.lambda) },
        Delta::Auto if binary => {
            let minority = minority_of(&train, cfg)?;
            RewardConfig {
                lambda: cfg.lambda,
                delta: imbalance_ratio(&train, minority)?,
                gamma: cfg.gamma,
                minority_class: Some(minority),
            }
        }
        Delta::Auto => RewardConfig { gamma: cfg.gamma, ..RewardConfig::balanced(cfg.lambda) },
    };
    reward.validate()?;
    Ok(Prepared { train, val, test, norm, reward, seeds })
}

pub struct Trained {
    pub a2c: a2c::TrainOutcome,
    pub improved: Option<mcts::ImproveOutcome>,
}

impl Trained {
    pub fn network(&self) -> &Network {
        self.improved.as_ref().map_or(&self.a2c.network, |o| &o.network)
    }

    pub fn mcts_log(&self) -> &[IterationLog] {
        self.improved.as_ref().map_or(&[], |o| &o.log)
    }
}

pub fn train(cfg: &RunConfig, p: &Prepared) -> Result<Trained> {
    let train_env = p.env(&p.train, cfg)?;
    let val_env = p.env(&p.val, cfg)?;
    let a2c = a2c::train(&train_env, &val_env, &cfg.a2c)?;
    let improved = if cfg.skip_mcts {
        None
    } else {
        Some(mcts::improve(&a2c.network, &train_env, &val_env, &cfg.mcts)?)
    };
    Ok(Trained { a2c, improved })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub best_epoch: usize,
    pub best_iteration: Option<usize>,
    pub a2c_validation: EvalReport,
    pub a2c_test: EvalReport,
    pub validation: EvalReport,
    pub test: EvalReport,
}

pub fn report(cfg: &RunConfig, p: &Prepared, t: &Trained) -> Result<RunReport> {
    let val_env = p.env(&p.val, cfg)?;
    let test_env = p.env(&p.test, cfg)?;
    Ok(RunReport {
        best_epoch: t.a2c.best_epoch,
        best_iteration: t.improved.as_ref().map(|o| o.best_iteration),
        a2c_validation: metrics::evaluate(&t.a2c.network, &val_env)?,
        a2c_test: metrics::evaluate(&t.a2c.network, &test_env)?,
        validation: metrics::evaluate(t.network(), &val_env)?,
        test: metrics::evaluate(t.network(), &test_env)?,
    })
}

pub fn dataset_label(cfg: &RunConfig) -> String {
    cfg.dataset
        .as_deref()
        .and_then(|p| p.file_stem())
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Full training run with every artifact written to `cfg.output`.
pub fn run_train(cfg: &RunConfig) -> Result<RunReport> {
    let p = prepare(cfg)?;
    let t = train(cfg, &p)?;
    let rep = report(cfg, &p, &t)?;

    let train_env = p.env(&p.train, cfg)?;
    let visits = mcts::collect_visit_log(&train_env, t.network(), &cfg.mcts, 0..p.train.n_rows())?;

    let manifest = Manifest {
        versions: Versions::current(),
        config: cfg.clone(),
        seeds: p.seeds.clone(),
        feature_names: p.train.feature_names().to_vec(),
        class_names: p.train.class_names().to_vec(),
        costs: p.train.costs().to_vec(),
        norm: p.norm.clone(),
        reward: p.reward,
        t_max: train_env.t_max(),
        rows: [p.train.n_rows(), p.val.n_rows(), p.test.n_rows()],
    };

    let dir = &cfg.output;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write(dir, MANIFEST, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    write(dir, A2C_LOG, &jsonl(&t.a2c.log)?)?;
    write(dir, MCTS_LOG, &jsonl(t.mcts_log())?)?;
    write(dir, A2C_CHECKPOINT, &t.a2c.network.to_checkpoint().to_json()?)?;
    write(dir, CHECKPOINT, &t.network().to_checkpoint().to_json()?)?;
    write(dir, VISITS, &visits.to_jsonl()?)?;
    write(dir, REPORT, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
    let row = ResultRow::new(&dataset_label(cfg), cfg.seed, &rep.test);
    write(dir, RESULTS, &format!("{RESULTS_HEADER}\n{}\n", row.to_csv_line()))?;
    Ok(rep)
}

pub fn read_manifest(run: &Path) -> Result<Manifest> {
    let path = run.join(MANIFEST);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
