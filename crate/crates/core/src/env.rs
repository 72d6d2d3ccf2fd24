//! Per-sample acquisition MDP.
//!
//! The state of an episode is the set of acquired features together with
//! their values. Acquiring feature `i` costs `-lambda * c_i`; classifying as
//! `k` ends the episode with a reward of `±1` (or `±delta` for samples of the
//! majority class when an imbalance weight is configured). Transitions are
//! deterministic.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Acquire(usize),
    Classify(usize),
}

impl Action {
    /// Flat index in the policy head: `i` for `Acquire(i)`, `p + k` for
    /// `Classify(k)`.
    pub fn index(self, n_features: usize) -> usize {
        match self {
            Action::Acquire(i) => i,
            Action::Classify(k) => n_features + k,
        }
    }

    pub fn from_index(index: usize, n_features: usize, n_classes: usize) -> Result<Self> {
        if index < n_features {
            Ok(Action::Acquire(index))
        } else if index < n_features + n_classes {
            Ok(Action::Classify(index - n_features))
        } else {
            Err(Error::contract(format!(
                "action index {index} out of range for {} actions",
                n_features + n_classes
            )))
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Acquire(i) => write!(f, "acquire f{i}"),
            Action::Classify(k) => write!(f, "classify {k}"),
        }
    }
}

/// Acquired features of one sample and their accumulated cost.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeState {
    row: usize,
    acquired: Vec<usize>,
    indicator: Vec<bool>,
    values: Vec<f64>,
    cost: f64,
}

impl EpisodeState {
    pub fn row(&self) -> usize {
        self.row
    }

    /// Acquired feature indices in acquisition order.
    pub fn acquired(&self) -> &[usize] {
        &self.acquired
    }

    pub fn has(&self, feature: usize) -> bool {
        self.indicator[feature]
    }

    /// Revealed values; zero for unacquired features.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn accumulated_cost(&self) -> f64 {
        self.cost
    }

    pub fn t(&self) -> usize {
        self.acquired.len()
    }

    /// `[indicator ‖ values]`, length `2p`.
    pub fn encode(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.values.len());
        out.extend(self.indicator.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        out.extend_from_slice(&self.values);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Scale of acquisition costs.
    pub lambda: f64,
    /// Terminal reward weight of majority-class samples.
    pub delta: f64,
    pub gamma: f64,
    /// `None` means balanced mode: every terminal reward is `±1`.
    pub minority_class: Option<usize>,
}

impl RewardConfig {
    pub fn balanced(lambda: f64) -> Self {
        Self { lambda, delta: 1.0, gamma: 1.0, minority_class: None }
    }

    /// Minority-weighted rewards with `delta` set to the class imbalance ratio.
    pub fn imbalance_weighted(ds: &Dataset, lambda: f64, minority: usize) -> Result<Self> {
        Ok(Self {
            lambda,
            delta: imbalance_ratio(ds, minority)?,
            gamma: 1.0,
            minority_class: Some(minority),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::validation(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::validation(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn effective_delta(&self) -> f64 {
        if self.minority_class.is_some() {
            self.delta
        } else {
            1.0
        }
    }
}

/// Result of one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EpisodeState,
    pub reward: f64,
    pub done: bool,
}

/// Acquisition MDP over the rows of a dataset.
#[derive(Debug, Clone, Copy)]
pub struct Environment<'a> {
    ds: &'a Dataset,
    reward: RewardConfig,
    t_max: usize,
}

impl<'a> Environment<'a> {
    /// `t_max` caps the number of acquisitions; `None` allows all features.
    pub fn new(ds: &'a Dataset, reward: RewardConfig, t_max: Option<usize>) -> Result<Self> {
        reward.validate()?;
        if let Some(m) = reward.minority_class {
            if m >= ds.n_classes() {
                return Err(Error::validation(format!("minority class {m} out of range")));
            }
        }
        let t_max = t_max.unwrap_or(ds.n_features()).min(ds.n_features());
        Ok(Self { ds, reward, t_max })
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn n_features(&self) -> usize {
        self.ds.n_features()
    }

    pub fn n_actions(&self) -> usize {
        self.ds.n_features() + self.ds.n_classes()
    }

    pub fn action(&self, index: usize) -> Result<Action> {
        Action::from_index(index, self.ds.n_features(), self.ds.n_classes())
    }

    pub fn reset(&self, row: usize) -> Result<EpisodeState> {
        if row >= self.ds.n_rows() {
            return Err(Error::contract(format!("row {row} out of range")));
        }
        let p = self.ds.n_features();
        Ok(EpisodeState {
            row,
            acquired: Vec::new(),
            indicator: vec![false; p],
            values: vec![0.0; p],
            cost: 0.0,
        })
    }

    /// Legal-action mask of length `p + K`.
    pub fn legal_actions(&self, s: &EpisodeState) -> Vec<bool> {
        let p = self.ds.n_features();
        let can_acquire = s.t() < self.t_max;
        let mut mask = Vec::with_capacity(self.n_actions());
        mask.extend((0..p).map(|i| can_acquire && !s.indicator[i] && self.ds.is_present(s.row, i)));
        mask.extend(std::iter::repeat_n(true, self.ds.n_classes()));
        mask
    }

    pub fn is_legal(&self, s: &EpisodeState, a: Action) -> bool {
        match a {
            Action::Acquire(i) => {
                i < self.ds.n_features()
                    && s.t() < self.t_max
                    && !s.indicator[i]
                    && self.ds.is_present(s.row, i)
            }
            Action::Classify(k) => k < self.ds.n_classes(),
        }
    }

    pub fn step(&self, s: &EpisodeState, a: Action) -> Result<Step> {
        if !self.is_legal(s, a) {
            return Err(Error::contract(format!("illegal action {a} at t={}", s.t())));
        }
        match a {
            Action::Acquire(i) => {
                let mut next = s.clone();
                let c = self.ds.costs()[i];
                next.acquired.push(i);
                next.indicator[i] = true;
                next.values[i] = self.ds.value(s.row, i).unwrap_or(0.0);
                next.cost += c;
                Ok(Step { state: next, reward: -self.reward.lambda * c, done: false })
            }
            Action::Classify(k) => Ok(Step {
                state: s.clone(),
                reward: self.terminal_reward(k, s.row),
                done: true,
            }),
        }
    }

    /// Reward of predicting `predicted` for `row`.
    pub fn terminal_reward(&self, predicted: usize, row: usize) -> f64 {
        let label = self.ds.label(row);
        let weight = match self.reward.minority_class {
            Some(m) if label != m => self.reward.delta,
            _ => 1.0,
        };
        if predicted == label {
            weight
        } else {
            -weight
        }
    }
}

/// `#minority / #majority` for a binary dataset, clamped to `[0, 1]`.
pub fn imbalance_ratio(ds: &Dataset, minority: usize) -> Result<f64> {
    if ds.n_classes() != 2 || minority >= 2 {
        return Err(Error::validation("imbalance ratio requires a binary dataset"));
    }
    let counts = ds.class_counts();
    let (min, maj) = (counts[minority], counts[1 - minority]);
    if min == 0 || maj == 0 {
        return Err(Error::validation("imbalance ratio needs both classes present"));
    }
    Ok((min as f64 / maj as f64).clamp(0.0, 1.0))
}
