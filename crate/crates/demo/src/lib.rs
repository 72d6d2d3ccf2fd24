//! Browser demo: train a small policy on a synthetic task, watch the tree
//! search pick actions for one sample, and read the resulting rule tree.
//!
//! [`Session`] is plain Rust and testable natively; [`Demo`] wraps it for
//! JavaScript and exchanges JSON strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use costly::a2c::{self, A2CConfig};
use costly::data::{self, Dataset, SplitSpec};
use costly::env::{Environment, RewardConfig};
use costly::mcts::{self, MctsConfig};
use costly::metrics::{self, EvalReport};
use costly::net::Network;
use costly::rules::{self, RuleNode, RuleOptions, RuleTree};
use costly::synth;
use costly::Result;

const HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// `f0` decides the label; two noise features.
    SingleInformative,
    /// `f0` and its expensive copy `f1`, plus noise.
    RedundantPair,
    /// Two weakly informative features and two noise features.
    Overlapping,
}

impl Task {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "single" => Some(Self::SingleInformative),
            "redundant" => Some(Self::RedundantPair),
            "overlapping" => Some(Self::Overlapping),
            _ => None,
        }
    }

    fn generate(self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            Self::SingleInformative => synth::single_informative(n, seed),
            Self::RedundantPair => synth::redundant_pair(n, seed),
            Self::Overlapping => synth::overlapping_binary(n, 2.0, seed),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub mean_reward: f64,
    pub val_accuracy: f64,
    pub val_mean_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainView {
    pub epochs_done: usize,
    pub curve: Vec<CurvePoint>,
    pub validation: EvalReport,
    pub feature_names: Vec<String>,
    pub costs: Vec<f64>,
    /// Share of validation samples that acquire each feature.
    pub acquisition_rate: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchStep {
    pub acquired: Vec<String>,
    pub actions: Vec<String>,
    pub priors: Vec<f64>,
    pub visits: Vec<u32>,
    pub chosen: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchView {
    pub row: usize,
    pub label: String,
    pub steps: Vec<SearchStep>,
    pub cost: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleLine {
    pub depth: usize,
    pub condition: Option<String>,
    pub node: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RulesView {
    pub lines: Vec<RuleLine>,
    pub dot: String,
    pub warning: Option<String>,
}

pub struct Session {
    train: Dataset,
    val: Dataset,
    reward: RewardConfig,
    net: Network,
    seed: u64,
    curve: Vec<CurvePoint>,
}

impl Session {
    pub fn new(task: Task, lambda: f64, seed: u64) -> Result<Self> {
        let ds = task.generate(400, seed)?;
        let (train, val, _) = data::split(&ds, &SplitSpec::new(0.6, 0.3, 0.1, seed)?)?;
        let (train, rest, _) = data::normalize(&train, &[&val])?;
        let val = rest.into_iter().next().expect("one extra split");
        let reward = RewardConfig::balanced(lambda);
        reward.validate()?;
        let net = Network::init(train.n_features(), train.n_classes(), HIDDEN, seed)?;
        Ok(Self { train, val, reward, net, seed, curve: Vec::new() })
    }

    fn envs(&self) -> Result<(Environment<'_>, Environment<'_>)> {
        Ok((Environment::new(&self.train, self.reward, None)?, Environment::new(&self.val, self.reward, None)?))
    }

    pub fn epochs_done(&self) -> usize {
        self.curve.len()
    }

    /// Continues actor-critic training for `epochs` more epochs.
    pub fn train(&mut self, epochs: usize) -> Result<TrainView> {
        let done = self.curve.len();
        let cfg = A2CConfig { epochs, hidden: HIDDEN, seed: self.seed.wrapping_add(done as u64), ..Default::default() };
        let out = {
            let (train_env, val_env) = self.envs()?;
            a2c::train_from(self.net.clone(), &train_env, &val_env, &cfg)?
        };
        for e in &out.log {
            self.curve.push(CurvePoint {
                epoch: done + e.epoch,
                mean_reward: e.mean_reward,
                val_accuracy: e.val_accuracy.unwrap_or(f64::NAN),
                val_mean_cost: e.val_mean_cost.unwrap_or(f64::NAN),
            });
        }
        self.net = out.network;
        self.view()
    }

    pub fn view(&self) -> Result<TrainView> {
        let (_, val_env) = self.envs()?;
        let p = self.val.n_features();
        let mut counts = vec![0usize; p];
        for row in 0..self.val.n_rows() {
            for f in metrics::decide(&self.net, &val_env, row)?.features {
                counts[f] += 1;
            }
        }
        let n = self.val.n_rows() as f64;
        Ok(TrainView {
            epochs_done: self.curve.len(),
            curve: self.curve.clone(),
            validation: metrics::evaluate(&self.net, &val_env)?,
            feature_names: self.val.feature_names().to_vec(),
            costs: self.val.costs().to_vec(),
            acquisition_rate: counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }

    fn action_name(&self, env: &Environment<'_>, a: usize) -> Result<String> {
        Ok(match env.action(a)? {
            costly::env::Action::Acquire(i) => format!("acquire {}", self.val.feature_names()[i]),
            costly::env::Action::Classify(k) => format!("classify {}", self.val.class_names()[k]),
        })
    }

    /// Searches one validation sample to termination and reports every root.
    pub fn search(&self, row: usize, simulations: usize, c_puct: f64) -> Result<SearchView> {
        let (_, env) = self.envs()?;
        let cfg = MctsConfig { simulations, c_puct, ..Default::default() };
        cfg.validate()?;
        let ep = mcts::episode_with_mcts(&env, row, &self.net, &cfg)?;
        let names: Vec<String> = (0..env.n_actions()).map(|a| self.action_name(&env, a)).collect::<Result<_>>()?;
        let mut steps = Vec::new();
        for (label, record) in ep.labels.iter().zip(&ep.records) {
            steps.push(SearchStep {
                acquired: record.acquired.iter().map(|&(i, v)| format!("{} = {v:.2}", self.val.feature_names()[i])).collect(),
                actions: names.clone(),
                priors: self.net.forward(&label.state, &label.legal)?.probs,
                visits: record.visits.clone(),
                chosen: names[record.action].clone(),
            });
        }
        let truth = self.val.label(row);
        Ok(SearchView {
            row,
            label: self.val.class_names()[truth].clone(),
            steps,
            cost: ep.cost,
            correct: ep.prediction == truth,
        })
    }

    /// Rule tree of the search on every validation sample.
    pub fn rules(&self, simulations: usize, min_visits: u64) -> Result<RulesView> {
        let (_, env) = self.envs()?;
        let cfg = MctsConfig { simulations, ..Default::default() };
        cfg.validate()?;
        let log = mcts::collect_visit_log(&env, &self.net, &cfg, 0..self.val.n_rows())?;
        let tree = rules::aggregate(&log, &RuleOptions { min_visits, ..Default::default() })?;
        let mut lines = Vec::new();
        fn walk(tree: &RuleTree, node: &RuleNode, depth: usize, out: &mut Vec<RuleLine>) {
            out.push(RuleLine {
                depth,
                condition: node.condition.as_ref().map(|c| tree.condition_label(c)),
                node: tree.node_label(node),
            });
            for child in &node.children {
                walk(tree, child, depth + 1, out);
            }
        }
        for root in &tree.roots {
            walk(&tree, root, 0, &mut lines);
        }
        Ok(RulesView { lines, dot: tree.to_dot(), warning: tree.warning.clone() })
    }

    pub fn val_rows(&self) -> usize {
        self.val.n_rows()
    }
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> std::result::Result<String, JsError> {
    serde_json::to_string(v).map_err(js_err)
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    /// `task` is one of `single`, `redundant`, `overlapping`.
    #[wasm_bindgen(constructor)]
    pub fn new(task: &str, lambda: f64, seed: u32) -> std::result::Result<Demo, JsError> {
        let task = Task::parse(task).ok_or_else(|| js_err(format!("unknown task '{task}'")))?;
        Ok(Demo { inner: Session::new(task, lambda, u64::from(seed)).map_err(js_err)? })
    }

    #[wasm_bindgen(js_name = valRows)]
    pub fn val_rows(&self) -> usize {
        self.inner.val_rows()
    }

    pub fn train(&mut self, epochs: usize) -> std::result::Result<String, JsError> {
        to_json(&self.inner.train(epochs).map_err(js_err)?)
    }

    pub fn search(&self, row: usize, simulations: usize, c_puct: f64) -> std::result::Result<String, JsError> {
        to_json(&self.inner.search(row, simulations, c_puct).map_err(js_err)?)
    }

    pub fn rules(&self, simulations: usize, min_visits: u32) -> std::result::Result<String, JsError> {
        to_json(&self.inner.rules(simulations, u64::from(min_visits)).map_err(js_err)?)
    }
}
