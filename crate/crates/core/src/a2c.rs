//! On-policy advantage actor-critic training of the shared network.
//!
//! Each epoch runs one stochastic episode per (shuffled) training row. The TD
//! error `r + γV(s') − V(s)` of every step is the advantage of the policy
//! term; the same quantity drives the value regression. Gradients are summed
//! over an episode and applied once at its end.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::metrics::{self, EvalReport};
use crate::net::{A2CSample, Adam, Network, PolicyValue, Trace, DEFAULT_HIDDEN};
use crate::seed;
use crate::{Error, Result};

/// Runs abort when the mean absolute TD error of an epoch exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub legal: Vec<bool>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_legal: Vec<bool>,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Sample from the masked policy.
    Stochastic,
    /// Most probable legal action, lowest index on ties.
    Greedy,
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Plays one episode on `row`. Always terminates: once the horizon is
/// reached only classification actions remain legal.
pub fn run_episode<R: Rng + ?Sized>(
    env: &Environment<'_>,
    row: usize,
    net: &Network,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<Transition>> {
    Ok(rollout(env, row, net, mode, rng)?.into_iter().map(|(tr, _, _)| tr).collect())
}

/// Episode together with the forward pass taken at every step.
fn rollout<R: Rng + ?Sized>(
    env: &Environment<'_>,
    row: usize,
    net: &Network,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<(Transition, Trace, PolicyValue)>> {
    let mut state = env.reset(row)?;
    let mut episode = Vec::new();
    loop {
        let x = state.encode();
        let legal = env.legal_actions(&state);
        let (trace, out) = net.forward_traced(&x, &legal)?;
        let action = match mode {
            Mode::Greedy => out.greedy_action(&legal),
            Mode::Stochastic => sample_index(&out.probs, rng),
        };
        let step = env.step(&state, env.action(action)?)?;
        let next_legal = env.legal_actions(&step.state);
        let tr = Transition {
            next_state: step.state.encode(),
            state: x,
            legal,
            action,
            reward: step.reward,
            next_legal,
            done: step.done,
        };
        episode.push((tr, trace, out));
        if step.done {
            return Ok(episode);
        }
        state = step.state;
    }
}

/// `δ_t = r_t + γ·V(s_{t+1})·(1 − done) − V(s_t)` under the current network.
pub fn td_errors(episode: &[Transition], net: &Network, gamma: f64) -> Result<Vec<f64>> {
    if episode.is_empty() {
        return Err(Error::contract("empty episode"));
    }
    let (deltas, _) = td_with_targets(episode, net, gamma)?;
    Ok(deltas)
}

fn td_with_targets(episode: &[Transition], net: &Network, gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut deltas = Vec::with_capacity(episode.len());
    let mut targets = Vec::with_capacity(episode.len());
    let mut v = net.value(&episode[0].state)?;
    for tr in episode {
        let v_next = if tr.done { 0.0 } else { net.value(&tr.next_state)? };
        let target = tr.reward + gamma * v_next;
        deltas.push(target - v);
        targets.push(target);
        v = v_next;
    }
    Ok((deltas, targets))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct A2CConfig {
    pub epochs: usize,
    pub lr: f64,
    pub entropy_weight: f64,
    pub value_loss_weight: f64,
    pub hidden: usize,
    pub seed: u64,
    /// Validate every this many epochs (and after the last one).
    pub eval_every: usize,
}

impl Default for A2CConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            entropy_weight: 0.01,
            value_loss_weight: 1.0,
            hidden: DEFAULT_HIDDEN,
            seed: 0,
            eval_every: 1,
        }
    }
}

impl A2CConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::validation("a2c learning rate must be > 0"));
        }
        if !(self.entropy_weight >= 0.0 && self.value_loss_weight >= 0.0) {
            return Err(Error::validation("a2c loss weights must be >= 0"));
        }
        if self.hidden == 0 || self.eval_every == 0 {
            return Err(Error::validation("hidden width and eval_every must be >= 1"));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_reward: f64,
    pub mean_abs_td: f64,
    pub entropy: f64,
    pub val_accuracy: Option<f64>,
    pub val_mean_cost: Option<f64>,
    pub val_objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the best validation objective.
    pub network: Network,
    pub best_epoch: usize,
    pub best_report: Option<EvalReport>,
    pub log: Vec<EpochLog>,
}

/// Trains a freshly initialized network.
pub fn train(train_env: &Environment<'_>, val_env: &Environment<'_>, cfg: &A2CConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ds = train_env.dataset();
    let net = Network::init(ds.n_features(), ds.n_classes(), cfg.hidden, seed::substream(cfg.seed, seed::INIT))?;
    train_from(net, train_env, val_env, cfg)
}

/// Continues training `net`.
pub fn train_from(
    mut net: Network,
    train_env: &Environment<'_>,
    val_env: &Environment<'_>,
    cfg: &A2CConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let gamma = train_env.reward_config().gamma;
    let n = train_env.dataset().n_rows();
    let mut rng = seed::rng(seed::substream(cfg.seed, seed::EPISODES));
    let mut opt = Adam::new(net.params().len());
    let mut rows: Vec<usize> = (0..n).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Network, EvalReport)> = None;

    for epoch in 1..=cfg.epochs {
        rows.shuffle(&mut rng);
        let mut reward_sum = 0.0;
        let mut abs_td = 0.0;
        let mut entropy_sum = 0.0;
        let mut steps = 0usize;
        for &row in &rows {
            let episode = rollout(train_env, row, &net, Mode::Stochastic, &mut rng)?;
            let mut grad = vec![0.0; net.params().len()];
            for (t, (tr, trace, out)) in episode.iter().enumerate() {
                // the value of s_{t+1} was computed by the next step's forward pass
                let v_next = if tr.done { 0.0 } else { episode[t + 1].2.value };
                let target = tr.reward + gamma * v_next;
                let delta = target - out.value;
                let sample = A2CSample {
                    state: tr.state.clone(),
                    legal: tr.legal.clone(),
                    action: tr.action,
                    advantage: delta,
                    value_target: target,
                    entropy_weight: cfg.entropy_weight,
                };
                net.a2c_accumulate(&sample, trace, &out.probs, cfg.value_loss_weight, &mut grad);
                reward_sum += tr.reward;
                abs_td += delta.abs();
                entropy_sum += out.entropy();
            }
            Network::check_grad(&grad)?;
            net.apply_update(&grad, &mut opt, cfg.lr)?;
            steps += episode.len();
        }
        let mean_abs_td = abs_td / steps.max(1) as f64;
        if mean_abs_td > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { stage: format!("a2c epoch {epoch}"), mean_abs_td });
        }

        let mut entry = EpochLog {
            epoch,
            mean_reward: reward_sum / n as f64,
            mean_abs_td,
            entropy: entropy_sum / steps.max(1) as f64,
            val_accuracy: None,
            val_mean_cost: None,
            val_objective: None,
        };
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            let report = metrics::evaluate(&net, val_env)?;
            entry.val_accuracy = Some(report.accuracy);
            entry.val_mean_cost = Some(report.mean_cost);
            entry.val_objective = Some(report.objective);
            if best.as_ref().is_none_or(|(obj, ..)| report.objective > *obj) {
                best = Some((report.objective, epoch, net.clone(), report));
            }
        }
        log.push(entry);
    }

    Ok(match best {
        Some((_, best_epoch, network, report)) => {
            TrainOutcome { network, best_epoch, best_report: Some(report), log }
        }
        None => TrainOutcome { network: net, best_epoch: 0, best_report: None, log },
    })
}
