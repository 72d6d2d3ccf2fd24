//! Evaluation of greedy policies: accuracy, acquisition cost, AUC and the
//! accuracy/cost trade-off objective.

use serde::{Deserialize, Serialize};

use crate::a2c::{run_episode, Mode};
use crate::env::{Action, Environment};
use crate::net::Network;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_rows: usize,
    pub accuracy: f64,
    /// Mean total acquisition cost in cost units (not scaled by lambda).
    pub mean_cost: f64,
    pub mean_features: f64,
    /// Only for binary tasks with both classes present.
    pub auc: Option<f64>,
    pub lambda: f64,
    /// `accuracy − lambda · mean_cost`
    pub objective: f64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<usize>>,
}

/// One greedy episode summarized.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub prediction: usize,
    pub cost: f64,
    pub features: Vec<usize>,
    /// Probability of the positive class renormalized over the two
    /// classification actions at the stopping state (binary tasks only).
    pub score: Option<f64>,
}

fn positive_class(env: &Environment<'_>) -> usize {
    env.reward_config().minority_class.unwrap_or(1)
}

pub fn decide(net: &Network, env: &Environment<'_>, row: usize) -> Result<Decision> {
    // greedy episodes never touch the generator
    let episode = run_episode(env, row, net, Mode::Greedy, &mut seed::rng(0))?;
    let last = episode.last().expect("episodes are nonempty");
    let prediction = match env.action(last.action)? {
        Action::Classify(k) => k,
        Action::Acquire(_) => unreachable!("episodes end with a classification"),
    };
    let p = env.n_features();
    let features: Vec<usize> = episode.iter().filter(|t| t.action < p).map(|t| t.action).collect();
    let cost = features.iter().map(|&i| env.dataset().costs()[i]).sum();
    let score = if env.dataset().n_classes() == 2 {
        let probs = net.forward(&last.state, &last.legal)?.probs;
        let pos = positive_class(env);
        let (pp, pn) = (probs[p + pos], probs[p + 1 - pos]);
        Some(if pp + pn > 0.0 { pp / (pp + pn) } else { 0.5 })
    } else {
        None
    };
    Ok(Decision { prediction, cost, features, score })
}

/// Greedy evaluation of `net` on every row of the environment's dataset.
pub fn evaluate(net: &Network, env: &Environment<'_>) -> Result<EvalReport> {
    let ds = env.dataset();
    let shape = net.shape();
    if shape.n_inputs != 2 * ds.n_features() || shape.n_actions != env.n_actions() {
        return Err(Error::validation(format!(
            "network expects {} inputs / {} actions, dataset gives {} / {}",
            shape.n_inputs,
            shape.n_actions,
            2 * ds.n_features(),
            env.n_actions()
        )));
    }
    let k = ds.n_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut cost = 0.0;
    let mut features = 0usize;
    let mut scores = Vec::new();
    for row in 0..ds.n_rows() {
        let d = decide(net, env, row)?;
        confusion[ds.label(row)][d.prediction] += 1;
        cost += d.cost;
        features += d.features.len();
        if let Some(s) = d.score {
            scores.push(s);
        }
    }
    let n = ds.n_rows() as f64;
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let accuracy = correct as f64 / n;
    let mean_cost = cost / n;
    let auc = if k == 2 {
        let pos = positive_class(env);
        let labels: Vec<bool> = ds.labels().iter().map(|&y| y == pos).collect();
        auc(&scores, &labels).ok()
    } else {
        None
    };
    let lambda = env.reward_config().lambda;
    Ok(EvalReport {
        n_rows: ds.n_rows(),
        accuracy,
        mean_cost,
        mean_features: features as f64 / n,
        auc,
        lambda,
        objective: accuracy - lambda * mean_cost,
        confusion,
    })
}

/// Area under the ROC curve via the Mann–Whitney statistic; tied scores
/// count one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::validation("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("auc score".into()));
    }
    let n_pos = positive.iter().filter(|&&b| b).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::validation("auc needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks (1-based) over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j].iter().filter(|&&idx| positive[idx]).count() as f64 * avg_rank;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Column order of the results table.
pub const RESULTS_HEADER: &str = "dataset,lambda,seed,accuracy,mean_cost,auc,objective";

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub lambda: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub mean_cost: f64,
    pub auc: Option<f64>,
    pub objective: f64,
}

impl ResultRow {
    pub fn new(dataset: &str, seed: u64, report: &EvalReport) -> Self {
        Self {
            dataset: dataset.to_string(),
            lambda: report.lambda,
            seed,
            accuracy: report.accuracy,
            mean_cost: report.mean_cost,
            auc: report.auc,
            objective: report.objective,
        }
    }

    pub fn to_csv_line(&self) -> String {
        let auc = self.auc.map(|a| a.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.dataset, self.lambda, self.seed, self.accuracy, self.mean_cost, auc, self.objective
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::env::RewardConfig;
    use proptest::prelude::*;
    use rand::Rng;

    /// Counts concordant pairs directly.
    fn pairwise_auc(scores: &[f64], positive: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &pi) in positive.iter().enumerate() {
            for (j, &pj) in positive.iter().enumerate() {
                if pi && !pj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        let a = auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert!((a - 0.75).abs() < 1e-15);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::Validation(_))));
    }

    #[test]
    fn random_scorer_is_near_half() {
        let mut rng = seed::rng(17);
        let scores: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
        let labels: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
        let a = auc(&scores, &labels).unwrap();
        assert!((a - 0.5).abs() <= 0.05, "{a}");
    }

    /// Policy that always predicts class 0 at t = 0.
    fn constant_classifier(p: usize, k: usize) -> Network {
        let mut net = Network::init(p, k, 4, 0).unwrap();
        for (name, range) in net.shape().blocks() {
            if name.starts_with("policy") {
                let start = range.start;
                net.params_mut()[range].iter_mut().for_each(|w| *w = 0.0);
                if name == "policy.bias" {
                    net.params_mut()[start + p] = 30.0;
                }
            }
        }
        net
    }

    #[test]
    fn majority_classifier_report() {
        let ds = Dataset::new(
            vec![0.0; 5],
            vec![true; 5],
            vec![0, 0, 1, 0, 1],
            vec![0.4],
            vec!["f".into()],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let env = Environment::new(&ds, RewardConfig::balanced(0.1), None).unwrap();
        let r = evaluate(&constant_classifier(1, 2), &env).unwrap();
        assert!((r.accuracy - 0.6).abs() < 1e-15);
        assert_eq!(r.mean_cost, 0.0);
        assert_eq!(r.confusion, vec![vec![3, 0], vec![2, 0]]);
        assert_eq!(r.auc, Some(0.5));
        assert_eq!(r.objective, r.accuracy - r.lambda * r.mean_cost);

        let wrong = Network::init(2, 2, 4, 0).unwrap();
        assert!(evaluate(&wrong, &env).is_err());
    }

    proptest! {
        #[test]
        fn auc_matches_pair_count_and_is_rank_invariant(
            data in proptest::collection::vec((0u8..20, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| f64::from(*s) / 10.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            prop_assume!(labels.iter().any(|&b| b) && labels.iter().any(|&b| !b));
            let a = auc(&scores, &labels).unwrap();
            prop_assert!((a - pairwise_auc(&scores, &labels)).abs() < 1e-12);
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((a - auc(&warped, &labels).unwrap()).abs() < 1e-12);
        }
    }
}
