use costly::env::{Environment, RewardConfig};
use costly::mcts::{self, Evaluator, MctsConfig, SearchEnv, SearchTree, UniformEvaluator};
use costly::net::Network;
use costly::synth;

const ACQUIRE_COST: f64 = -0.01;

/// Two features, two classes; actions 0,1 acquire and 2,3 classify. Only
/// acquiring feature 0 and then classifying as class 0 pays +1; every other
/// terminal pays 0. The state is the sequence of actions taken.
struct Rigged;

impl SearchEnv for Rigged {
    type State = Vec<usize>;

    fn n_actions(&self) -> usize {
        4
    }

    fn legal_actions(&self, s: &Vec<usize>) -> Vec<bool> {
        (0..4).map(|a| a >= 2 || (s.len() < 2 && !s.contains(&a))).collect()
    }

    fn transition(&self, s: &Vec<usize>, action: usize) -> costly::Result<(Vec<usize>, f64, bool)> {
        let mut next = s.clone();
        next.push(action);
        if action < 2 {
            return Ok((next, ACQUIRE_COST, false));
        }
        let reward = if s.as_slice() == [0] && action == 2 { 1.0 } else { 0.0 };
        Ok((next, reward, true))
    }

    fn encode(&self, s: &Vec<usize>) -> Vec<f64> {
        s.iter().map(|&a| a as f64).collect()
    }

    fn gamma(&self) -> f64 {
        1.0
    }
}

/// Best achievable return after taking `action` in `s`, by exhaustive search.
fn oracle_value<M: SearchEnv>(env: &M, s: &M::State, action: usize) -> f64 {
    let (next, r, done) = env.transition(s, action).unwrap();
    if done {
        return r;
    }
    let best = env
        .legal_actions(&next)
        .iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .map(|(a, _)| oracle_value(env, &next, a))
        .fold(f64::NEG_INFINITY, f64::max);
    r + env.gamma() * best
}

fn oracle_best<M: SearchEnv>(env: &M, s: &M::State) -> usize {
    let legal = env.legal_actions(s);
    let mut best = None;
    for a in (0..legal.len()).filter(|&a| legal[a]) {
        let v = oracle_value(env, s, a);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((a, v));
        }
    }
    best.unwrap().0
}

#[test]
fn oracle_confirms_the_rigged_maximizer() {
    assert_eq!(oracle_best(&Rigged, &vec![]), 0);
    assert_eq!(oracle_best(&Rigged, &vec![0]), 2);
    assert!((oracle_value(&Rigged, &vec![], 0) - (1.0 + ACQUIRE_COST)).abs() < 1e-12);
    for a in 1..4 {
        assert!(oracle_value(&Rigged, &vec![], a) <= 0.0);
    }
}

#[test]
fn search_finds_the_rigged_optimum() {
    let eval = UniformEvaluator::default();
    let mut tree = SearchTree::new(&Rigged, vec![], &eval).unwrap();
    let (action, _) = tree.search_move(&eval, 100, 1.5).unwrap();
    assert_eq!(action, oracle_best(&Rigged, &vec![]));
}

#[test]
fn search_labels_concentrate_on_the_optimum_at_every_root() {
    let eval = UniformEvaluator::default();
    let mut tree = SearchTree::new(&Rigged, vec![], &eval).unwrap();
    let mut roots = 0;
    loop {
        let state = tree.root().state.clone();
        let best = oracle_best(&Rigged, &state);
        let (action, policy) = tree.search_move(&eval, 200, 1.5).unwrap();
        assert_eq!(action, best);
        assert!(policy[best] >= 0.8, "root {state:?}: mass {} on the optimum", policy[best]);
        roots += 1;
        let (child, _) = tree.advance(action, &eval).unwrap();
        if tree.node(child).terminal {
            assert_eq!(tree.node(child).value, 1.0);
            break;
        }
    }
    assert_eq!(roots, 2);
}

#[test]
fn single_simulation_gives_a_point_mass() {
    let eval = UniformEvaluator::default();
    let mut tree = SearchTree::new(&Rigged, vec![], &eval).unwrap();
    let (action, policy) = tree.search_move(&eval, 1, 1.5).unwrap();
    assert_eq!(policy.iter().filter(|&&p| p > 0.0).count(), 1);
    assert_eq!(policy[action], 1.0);
}

#[test]
fn visit_distribution_is_normalized_and_legal() {
    let eval = UniformEvaluator::default();
    let mut tree = SearchTree::new(&Rigged, vec![1], &eval).unwrap();
    let (_, policy) = tree.search_move(&eval, 37, 1.5).unwrap();
    let visits = tree.root_visits();
    assert!((policy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(visits.iter().sum::<u32>(), 37);
    let legal = Rigged.legal_actions(&vec![1]);
    for a in 0..4 {
        assert_eq!(policy[a], f64::from(visits[a]) / 37.0);
        if !legal[a] {
            assert_eq!(policy[a], 0.0);
        }
    }
}

/// Chain of binary choices of fixed depth; acquisition-like rewards everywhere.
struct Chain {
    width: usize,
    depth: usize,
}

impl SearchEnv for Chain {
    type State = Vec<usize>;

    fn n_actions(&self) -> usize {
        self.width
    }

    fn legal_actions(&self, _s: &Vec<usize>) -> Vec<bool> {
        vec![true; self.width]
    }

    fn transition(&self, s: &Vec<usize>, action: usize) -> costly::Result<(Vec<usize>, f64, bool)> {
        let mut next = s.clone();
        next.push(action);
        let r = ((s.len() * 7 + action * 3) % 5) as f64 / 5.0 - 0.4;
        Ok((next.clone(), r, next.len() >= self.depth))
    }

    fn encode(&self, s: &Vec<usize>) -> Vec<f64> {
        s.iter().map(|&a| a as f64).collect()
    }

    fn gamma(&self) -> f64 {
        0.9
    }
}

#[test]
fn pure_exploration_spreads_visits_evenly() {
    let eval = UniformEvaluator::default();
    for width in 2..6 {
        for sims in [1, 7, 50, 123] {
            let env = Chain { width, depth: 4 };
            let mut tree = SearchTree::new(&env, vec![], &eval).unwrap();
            tree.search_move(&eval, sims, 1e9).unwrap();
            let visits = tree.root_visits();
            let (lo, hi) = (visits.iter().min().unwrap(), visits.iter().max().unwrap());
            assert!(hi - lo <= 1, "width {width}, {sims} sims: {visits:?}");
        }
    }
}

/// `(action, visits, q, reward)` per edge, then terminal flag and value.
type NodeStats = (Vec<(usize, u32, f64, f64)>, bool, f64);

fn subtree<M: SearchEnv>(tree: &SearchTree<'_, M>, id: usize) -> Vec<NodeStats> {
    let node = tree.node(id);
    let mut out = vec![(
        node.edges.iter().map(|e| (e.action, e.visits, e.q, e.reward)).collect(),
        node.terminal,
        node.value,
    )];
    for e in &node.edges {
        if let Some(c) = e.child {
            out.extend(subtree(tree, c));
        }
    }
    out
}

#[test]
fn re_rooting_keeps_subtree_statistics() {
    let env = Chain { width: 3, depth: 5 };
    let eval = UniformEvaluator { value: 0.3 };
    let mut tree = SearchTree::new(&env, vec![], &eval).unwrap();
    let (action, _) = tree.search_move(&eval, 200, 1.5).unwrap();
    let edge = tree.root().edges.iter().find(|e| e.action == action).unwrap().clone();
    let child = edge.child.unwrap();
    let before = subtree(&tree, child);
    let nodes = tree.node_count();

    let (new_root, reward) = tree.advance(action, &eval).unwrap();
    assert_eq!(new_root, child);
    assert_eq!(reward, edge.reward);
    assert_eq!(tree.node_count(), nodes);
    assert_eq!(subtree(&tree, tree.root_id()), before);

    let carried = tree.root().total_visits();
    assert_eq!(carried, edge.visits - 1, "the visit that expanded the child passes no edge below it");
    tree.search_move(&eval, 40, 1.5).unwrap();
    assert_eq!(tree.root().total_visits(), carried + 40);
}

#[test]
fn terminal_leaves_carry_the_reward_and_no_edges() {
    let eval = UniformEvaluator { value: 0.5 };
    let mut tree = SearchTree::new(&Rigged, vec![0], &eval).unwrap();
    tree.search_move(&eval, 10, 1.5).unwrap();
    for e in &tree.root().edges {
        let child = tree.node(e.child.unwrap());
        if e.action >= 2 {
            assert!(child.terminal);
            assert!(child.edges.is_empty());
            assert_eq!(child.value, if e.action == 2 { 1.0 } else { 0.0 });
            assert_eq!(e.q, child.value, "terminal edges back up the reward itself");
        }
    }
}

#[test]
fn expansion_caches_network_priors_exactly() {
    let ds = synth::single_informative(20, 3).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.05), None).unwrap();
    let net = Network::init(3, 2, 16, 11).unwrap();
    let state = env.reset(4).unwrap();
    let node = SearchTree::expand_and_evaluate(&env, state.clone(), &net).unwrap();
    let legal = env.legal_actions(&state);
    let out = net.forward(&state.encode(), &legal).unwrap();
    assert_eq!(node.edges.len(), legal.iter().filter(|&&b| b).count());
    for e in &node.edges {
        assert_eq!(e.prior.to_bits(), out.probs[e.action].to_bits());
        assert_eq!((e.visits, e.q, e.child), (0, 0.0, None));
    }
    assert_eq!(node.value.to_bits(), out.value.to_bits());
}

#[test]
fn episodes_follow_argmax_choices_and_are_deterministic() {
    let ds = synth::single_informative(30, 5).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.05), None).unwrap();
    let net = Network::init(3, 2, 16, 2).unwrap();
    let cfg = MctsConfig { simulations: 30, ..Default::default() };
    for row in 0..ds.n_rows() {
        let a = mcts::episode_with_mcts(&env, row, &net, &cfg).unwrap();
        let b = mcts::episode_with_mcts(&env, row, &net, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.len(), a.actions.len());
        for (label, (&action, record)) in a.labels.iter().zip(a.actions.iter().zip(&a.records)) {
            let most = record.visits.iter().max().unwrap();
            assert_eq!(record.visits.iter().position(|v| v == most).unwrap(), action);
            assert_eq!(record.action, action);
            assert!((label.policy.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(label.policy.iter().zip(&label.legal).all(|(&p, &ok)| ok || p == 0.0));
        }
        assert!(*a.actions.last().unwrap() >= 3);
        assert_eq!(a.prediction, a.actions.last().unwrap() - 3);
    }
}

#[test]
fn last_label_targets_the_terminal_reward() {
    let ds = synth::single_informative(10, 8).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.05), None).unwrap();
    let net = Network::init(3, 2, 16, 4).unwrap();
    let cfg = MctsConfig { simulations: 20, ..Default::default() };
    for row in 0..ds.n_rows() {
        let ep = mcts::episode_with_mcts(&env, row, &net, &cfg).unwrap();
        let last = ep.labels.last().unwrap();
        let truth = ds.label(row);
        assert_eq!(last.value_target, if ep.prediction == truth { 1.0 } else { -1.0 });
    }
}

#[test]
fn improve_with_no_iterations_returns_the_initial_network() {
    let ds = synth::redundant_pair(40, 1).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.1), None).unwrap();
    let init = Network::init(3, 2, 8, 9).unwrap();
    let cfg = MctsConfig { iterations: 0, simulations: 5, ..Default::default() };
    let out = mcts::improve(&init, &env, &env, &cfg).unwrap();
    assert_eq!(out.network.params(), init.params());
    assert_eq!(out.best_iteration, 0);
    assert_eq!(out.log.len(), 1);
}

#[test]
fn improve_is_deterministic() {
    let ds = synth::redundant_pair(40, 2).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.1), None).unwrap();
    let init = Network::init(3, 2, 8, 3).unwrap();
    let cfg = MctsConfig { iterations: 2, simulations: 10, samples_per_iteration: Some(20), seed: 6, ..Default::default() };
    let a = mcts::improve(&init, &env, &env, &cfg).unwrap();
    let b = mcts::improve(&init, &env, &env, &cfg).unwrap();
    assert_eq!(a.network.params(), b.network.params());
    assert_eq!(a.log, b.log);
}

#[test]
fn uniform_evaluator_rejects_an_empty_mask() {
    assert!(UniformEvaluator::default().evaluate(&[], &[false, false]).is_err());
}
