//! Neural Monte Carlo tree search as a policy-improvement operator.
//!
//! One tree is grown per training sample. Selection follows PUCT,
//!
//! ```text
//! a* = argmax_a  Q(s,a) + c · π(s,a) · sqrt(Σ_b N(s,b)) / (N(s,a) + 1)
//! ```
//!
//! leaves are scored by the network's value head (or by the true reward once
//! a classification has been made), and every edge on the path receives the
//! discounted return `G ← r + γ·G` accumulated from the leaf upwards, so that
//! `Q(s,a)` is the running mean of `r(s,a) + γ·V(s')`. After the simulations
//! the most visited root action is played and the tree is re-rooted at the
//! resulting child, keeping its statistics.
//!
//! The normalized root visit counts `π^M` and the one-step bootstrap value
//! `z = r + γ·v(s')` become distillation labels for the network.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::a2c::DIVERGENCE_LIMIT;
use crate::data::Dataset;
use crate::env::{Action, EpisodeState, Environment};
use crate::metrics::{self, EvalReport};
use crate::net::{Adam, Network};
use crate::seed;
use crate::{Error, Result};

/// Schema version of the visit-log format.
pub const VISIT_LOG_SCHEMA: u32 = 1;

/// Environment interface needed by the search.
pub trait SearchEnv {
    type State: Clone;

    fn n_actions(&self) -> usize;
    fn legal_actions(&self, s: &Self::State) -> Vec<bool>;
    /// `(next state, reward, done)`
    fn transition(&self, s: &Self::State, action: usize) -> Result<(Self::State, f64, bool)>;
    fn encode(&self, s: &Self::State) -> Vec<f64>;
    fn gamma(&self) -> f64;
}

impl SearchEnv for Environment<'_> {
    type State = EpisodeState;

    fn n_actions(&self) -> usize {
        Environment::n_actions(self)
    }

    fn legal_actions(&self, s: &EpisodeState) -> Vec<bool> {
        Environment::legal_actions(self, s)
    }

    fn transition(&self, s: &EpisodeState, action: usize) -> Result<(EpisodeState, f64, bool)> {
        let step = self.step(s, self.action(action)?)?;
        Ok((step.state, step.reward, step.done))
    }

    fn encode(&self, s: &EpisodeState) -> Vec<f64> {
        s.encode()
    }

    fn gamma(&self) -> f64 {
        self.reward_config().gamma
    }
}

/// Source of priors and leaf values.
pub trait Evaluator {
    /// `(probabilities over all actions, state value)`
    fn evaluate(&self, state: &[f64], legal: &[bool]) -> Result<(Vec<f64>, f64)>;
}

impl Evaluator for Network {
    fn evaluate(&self, state: &[f64], legal: &[bool]) -> Result<(Vec<f64>, f64)> {
        let out = self.forward(state, legal)?;
        Ok((out.probs, out.value))
    }
}

/// Uniform priors over legal actions and a constant leaf value.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformEvaluator {
    pub value: f64,
}

impl Evaluator for UniformEvaluator {
    fn evaluate(&self, _state: &[f64], legal: &[bool]) -> Result<(Vec<f64>, f64)> {
        let n = legal.iter().filter(|&&b| b).count();
        if n == 0 {
            return Err(Error::contract("no legal action"));
        }
        let p = 1.0 / n as f64;
        Ok((legal.iter().map(|&b| if b { p } else { 0.0 }).collect(), self.value))
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Flat action index.
    pub action: usize,
    pub prior: f64,
    pub visits: u32,
    pub q: f64,
    /// Instant reward of the transition; known once the child exists.
    pub reward: f64,
    pub child: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode<S> {
    pub state: S,
    pub terminal: bool,
    /// Network value for inner nodes, the classification reward for
    /// terminal ones.
    pub value: f64,
    /// One edge per legal action, in ascending action order.
    pub edges: Vec<Edge>,
}

impl<S> SearchNode<S> {
    pub fn total_visits(&self) -> u32 {
        self.edges.iter().map(|e| e.visits).sum()
    }
}

/// PUCT score of every edge of `node`.
pub fn puct_scores<S>(node: &SearchNode<S>, c: f64) -> Vec<f64> {
    let sqrt_total = f64::from(node.total_visits()).sqrt();
    node.edges
        .iter()
        .map(|e| e.q + c * e.prior * sqrt_total / (f64::from(e.visits) + 1.0))
        .collect()
}

/// Index of the edge chosen by PUCT. Before any visit the exploration term is
/// zero everywhere, so the highest prior is taken instead. Ties go to the
/// lowest action index.
pub fn puct_select<S>(node: &SearchNode<S>, c: f64) -> usize {
    let scores = if node.total_visits() == 0 {
        node.edges.iter().map(|e| e.prior).collect()
    } else {
        puct_scores(node, c)
    };
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// `r + γ·v_next`: the one-step estimate of an action value.
pub fn q_bootstrap(reward: f64, gamma: f64, v_next: f64) -> f64 {
    reward + gamma * v_next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathStep {
    pub node: NodeId,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub simulations: usize,
    pub c_puct: f64,
    /// Training rows searched per iteration; `None` means `min(n_train, 512)`.
    pub samples_per_iteration: Option<usize>,
    pub iterations: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs_per_iteration: usize,
    /// Stop after this many iterations without validation improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            simulations: 200,
            c_puct: 1.5,
            samples_per_iteration: None,
            iterations: 20,
            lr: 1e-3,
            batch_size: 32,
            epochs_per_iteration: 1,
            patience: 3,
            seed: 0,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.simulations == 0 {
            return Err(Error::validation("simulations must be >= 1"));
        }
        if !(self.c_puct > 0.0 && self.c_puct.is_finite()) {
            return Err(Error::validation("c_puct must be > 0"));
        }
        if !(self.lr > 0.0) || self.batch_size == 0 || self.patience == 0 {
            return Err(Error::validation("lr, batch_size and patience must be positive"));
        }
        Ok(())
    }
}

pub struct SearchTree<'a, M: SearchEnv> {
    env: &'a M,
    nodes: Vec<SearchNode<M::State>>,
    root: NodeId,
}

impl<'a, M: SearchEnv> SearchTree<'a, M> {
    /// Tree with an expanded root at `state`.
    pub fn new(env: &'a M, state: M::State, eval: &impl Evaluator) -> Result<Self> {
        let root = Self::expand_and_evaluate(env, state, eval)?;
        Ok(Self { env, nodes: vec![root], root: 0 })
    }

    /// Runs the evaluator on `state` and creates one unvisited edge per legal
    /// action carrying the evaluator's prior.
    pub fn expand_and_evaluate(env: &M, state: M::State, eval: &impl Evaluator) -> Result<SearchNode<M::State>> {
        let legal = env.legal_actions(&state);
        let (probs, value) = eval.evaluate(&env.encode(&state), &legal)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("leaf value".into()));
        }
        let edges = legal
            .iter()
            .enumerate()
            .filter(|(_, &ok)| ok)
            .map(|(action, _)| Edge { action, prior: probs[action], visits: 0, q: 0.0, reward: 0.0, child: None })
            .collect();
        Ok(SearchNode { state, terminal: false, value, edges })
    }

    pub fn root_id(&self) -> NodeId {
        self.root
    }

    pub fn root(&self) -> &SearchNode<M::State> {
        &self.nodes[self.root]
    }

    pub fn node(&self, id: NodeId) -> &SearchNode<M::State> {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Visit counts of the root edges over the flat action space.
    pub fn root_visits(&self) -> Vec<u32> {
        let mut visits = vec![0; self.env.n_actions()];
        for e in &self.root().edges {
            visits[e.action] = e.visits;
        }
        visits
    }

    /// Creates the child behind `edge` of `parent` and returns its value and
    /// whether it is terminal.
    fn expand_child(&mut self, parent: NodeId, edge: usize, eval: &impl Evaluator) -> Result<(f64, bool)> {
        let action = self.nodes[parent].edges[edge].action;
        let (next, reward, done) = self.env.transition(&self.nodes[parent].state, action)?;
        let child = if done {
            SearchNode { state: next, terminal: true, value: reward, edges: Vec::new() }
        } else {
            Self::expand_and_evaluate(self.env, next, eval)?
        };
        let value = child.value;
        let id = self.nodes.len();
        self.nodes.push(child);
        let e = &mut self.nodes[parent].edges[edge];
        e.child = Some(id);
        e.reward = reward;
        Ok((value, done))
    }

    /// One selection → expansion → backup pass from the root.
    pub fn simulate(&mut self, eval: &impl Evaluator, c_puct: f64) -> Result<()> {
        let mut path = Vec::new();
        let mut id = self.root;
        let (leaf_value, terminal) = loop {
            let node = &self.nodes[id];
            if node.terminal {
                break (node.value, true);
            }
            if node.edges.is_empty() {
                return Err(Error::contract("inner search node without edges"));
            }
            let edge = puct_select(node, c_puct);
            path.push(PathStep { node: id, edge });
            match node.edges[edge].child {
                Some(child) => id = child,
                None => break self.expand_child(id, edge, eval)?,
            }
        };
        self.backup(&path, leaf_value, terminal);
        Ok(())
    }

    /// Propagates a leaf value to the root. The deepest edge receives
    /// `r + γ·leaf_value`, or `leaf_value` itself when the leaf is terminal
    /// (its value already is the reward of the classifying edge). Each edge
    /// above receives `r + γ·G` of the edge below. `Q` is kept as the running
    /// mean of everything received.
    pub fn backup(&mut self, path: &[PathStep], leaf_value: f64, terminal_leaf: bool) {
        let gamma = self.env.gamma();
        let mut g = leaf_value;
        for (depth, step) in path.iter().enumerate().rev() {
            let e = &mut self.nodes[step.node].edges[step.edge];
            if !(terminal_leaf && depth + 1 == path.len()) {
                g = q_bootstrap(e.reward, gamma, g);
            }
            e.visits += 1;
            e.q = ((f64::from(e.visits) - 1.0) * e.q + g) / f64::from(e.visits);
        }
    }

    /// Runs `simulations` passes and returns the most visited root action
    /// (lowest index on ties) with the visit distribution `π^M`.
    pub fn search_move(&mut self, eval: &impl Evaluator, simulations: usize, c_puct: f64) -> Result<(usize, Vec<f64>)> {
        if self.root().terminal {
            return Err(Error::contract("search from a terminal root"));
        }
        for _ in 0..simulations {
            self.simulate(eval, c_puct)?;
        }
        let visits = self.root_visits();
        let total: u32 = visits.iter().sum();
        let mut best = 0;
        for (a, &n) in visits.iter().enumerate() {
            if n > visits[best] {
                best = a;
            }
        }
        let policy = visits.iter().map(|&n| f64::from(n) / f64::from(total)).collect();
        Ok((best, policy))
    }

    /// Re-roots the tree at the child reached by `action`, keeping the
    /// subtree statistics. Returns the child's id and the transition reward.
    pub fn advance(&mut self, action: usize, eval: &impl Evaluator) -> Result<(NodeId, f64)> {
        let root = self.root;
        let edge = self.nodes[root]
            .edges
            .iter()
            .position(|e| e.action == action)
            .ok_or_else(|| Error::contract(format!("action {action} is not legal at the root")))?;
        if self.nodes[root].edges[edge].child.is_none() {
            self.expand_child(root, edge, eval)?;
        }
        let e = &self.nodes[root].edges[edge];
        self.root = e.child.expect("child expanded above");
        Ok((self.root, e.reward))
    }
}

/// Distillation label produced at one search root.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchLabel {
    pub state: Vec<f64>,
    pub legal: Vec<bool>,
    /// `π^M`: normalized root visit counts.
    pub policy: Vec<f64>,
    pub value_target: f64,
}

/// Per-root summary written to the visit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    /// Row of the searched sample within its dataset.
    pub sample: usize,
    /// Position of this root within the sample's trajectory.
    pub ordinal: usize,
    pub label: usize,
    /// `(feature, value)` pairs acquired before this root, in order.
    pub acquired: Vec<(usize, f64)>,
    /// Flat index of the chosen action.
    pub action: usize,
    /// Value revealed by the chosen action, for acquisitions.
    pub revealed: Option<f64>,
    pub policy: Vec<f64>,
    pub visits: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitLogHeader {
    pub schema: u32,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum VisitLogLine {
    Header(VisitLogHeader),
    Visit(VisitRecord),
}

/// Line-delimited JSON: one header line followed by one line per root.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitLog {
    pub header: VisitLogHeader,
    pub records: Vec<VisitRecord>,
}

impl VisitLog {
    pub fn new(ds: &Dataset) -> Self {
        Self {
            header: VisitLogHeader {
                schema: VISIT_LOG_SCHEMA,
                feature_names: ds.feature_names().to_vec(),
                class_names: ds.class_names().to_vec(),
            },
            records: Vec::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.header.feature_names.len()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&VisitLogLine::Header(self.header.clone()))?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(&VisitLogLine::Visit(r.clone()))?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: VisitLogLine = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i as u64 + 1,
                msg: e.to_string(),
            })?;
            match parsed {
                VisitLogLine::Header(h) => {
                    if h.schema != VISIT_LOG_SCHEMA {
                        return Err(Error::validation(format!("unsupported visit-log schema {}", h.schema)));
                    }
                    header = Some(h);
                }
                VisitLogLine::Visit(r) => records.push(r),
            }
        }
        let header = header.ok_or_else(|| Error::validation("visit log has no header line"))?;
        Ok(Self { header, records })
    }
}

/// Outcome of searching one sample to termination.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchEpisode {
    pub labels: Vec<SearchLabel>,
    /// Chosen flat actions, one per root.
    pub actions: Vec<usize>,
    pub records: Vec<VisitRecord>,
    pub total_reward: f64,
    pub cost: f64,
    pub prediction: usize,
}

/// Searches, plays the most visited action, re-roots, and repeats until a
/// classification is made.
pub fn episode_with_mcts(
    env: &Environment<'_>,
    row: usize,
    eval: &impl Evaluator,
    cfg: &MctsConfig,
) -> Result<SearchEpisode> {
    let gamma = env.reward_config().gamma;
    let mut tree = SearchTree::new(env, env.reset(row)?, eval)?;
    let mut out = SearchEpisode {
        labels: Vec::new(),
        actions: Vec::new(),
        records: Vec::new(),
        total_reward: 0.0,
        cost: 0.0,
        prediction: 0,
    };
    loop {
        let state = tree.root().state.clone();
        let legal = env.legal_actions(&state);
        let (action, policy) = tree.search_move(eval, cfg.simulations, cfg.c_puct)?;
        let visits = tree.root_visits();
        let (child, reward) = tree.advance(action, eval)?;
        let next = tree.node(child);
        let (value_target, revealed) = match env.action(action)? {
            Action::Classify(k) => {
                out.prediction = k;
                (reward, None)
            }
            Action::Acquire(i) => (q_bootstrap(reward, gamma, next.value), Some(next.state.values()[i])),
        };
        out.records.push(VisitRecord {
            sample: row,
            ordinal: out.actions.len(),
            label: env.dataset().label(row),
            acquired: state.acquired().iter().map(|&i| (i, state.values()[i])).collect(),
            action,
            revealed,
            policy: policy.clone(),
            visits,
        });
        out.labels.push(SearchLabel { state: state.encode(), legal, policy, value_target });
        out.actions.push(action);
        out.total_reward += reward;
        if next.terminal {
            out.cost = next.state.accumulated_cost();
            return Ok(out);
        }
    }
}

/// Searches every row in `rows` with the final policy and logs each root.
pub fn collect_visit_log(
    env: &Environment<'_>,
    eval: &impl Evaluator,
    cfg: &MctsConfig,
    rows: impl IntoIterator<Item = usize>,
) -> Result<VisitLog> {
    let mut log = VisitLog::new(env.dataset());
    for row in rows {
        log.records.extend(episode_with_mcts(env, row, eval, cfg)?.records);
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub n_labels: usize,
    pub mean_loss: f64,
    pub mean_search_reward: f64,
    pub val_accuracy: f64,
    pub val_mean_cost: f64,
    pub val_objective: f64,
}

#[derive(Debug, Clone)]
pub struct ImproveOutcome {
    pub network: Network,
    /// 0 when no iteration beat the initial network.
    pub best_iteration: usize,
    pub best_report: EvalReport,
    pub log: Vec<IterationLog>,
}

/// Iterated search-and-distill starting from `init`. The returned network is
/// the one with the best validation objective, `init` included.
pub fn improve(
    init: &Network,
    train_env: &Environment<'_>,
    val_env: &Environment<'_>,
    cfg: &MctsConfig,
) -> Result<ImproveOutcome> {
    cfg.validate()?;
    let initial = metrics::evaluate(init, val_env)?;
    let mut log = vec![IterationLog {
        iteration: 0,
        n_labels: 0,
        mean_loss: 0.0,
        mean_search_reward: 0.0,
        val_accuracy: initial.accuracy,
        val_mean_cost: initial.mean_cost,
        val_objective: initial.objective,
    }];
    let mut best = (init.clone(), 0, initial);
    let mut net = init.clone();
    let mut opt = Adam::new(net.params().len());
    let mut rng = seed::rng(seed::substream(cfg.seed, seed::MCTS));
    let n = train_env.dataset().n_rows();
    let per_iteration = cfg.samples_per_iteration.unwrap_or(512).min(n);
    let mut rows: Vec<usize> = (0..n).collect();
    let mut stale = 0;

    for iteration in 1..=cfg.iterations {
        rows.shuffle(&mut rng);
        let mut labels = Vec::new();
        let mut search_reward = 0.0;
        for &row in &rows[..per_iteration] {
            let ep = episode_with_mcts(train_env, row, &net, cfg)?;
            search_reward += ep.total_reward;
            labels.extend(ep.labels);
        }

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for _ in 0..cfg.epochs_per_iteration {
            labels.shuffle(&mut rng);
            for batch in labels.chunks(cfg.batch_size) {
                let (loss, mut grad) = net.mcts_gradient(batch)?;
                let scale = 1.0 / batch.len() as f64;
                grad.iter_mut().for_each(|g| *g *= scale);
                let mean = loss * scale;
                if !mean.is_finite() || mean > DIVERGENCE_LIMIT {
                    return Err(Error::Diverged { stage: format!("mcts iteration {iteration}"), mean_abs_td: mean });
                }
                net.apply_update(&grad, &mut opt, cfg.lr)?;
                loss_sum += mean;
                batches += 1;
            }
        }

        let report = metrics::evaluate(&net, val_env)?;
        log.push(IterationLog {
            iteration,
            n_labels: labels.len(),
            mean_loss: loss_sum / batches.max(1) as f64,
            mean_search_reward: search_reward / per_iteration.max(1) as f64,
            val_accuracy: report.accuracy,
            val_mean_cost: report.mean_cost,
            val_objective: report.objective,
        });
        if report.objective > best.2.objective {
            best = (net.clone(), iteration, report);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let (network, best_iteration, best_report) = best;
    Ok(ImproveOutcome { network, best_iteration, best_report, log })
}
