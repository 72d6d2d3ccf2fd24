use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use costly::a2c::{self, A2CConfig, Mode};
use costly::env::{Environment, RewardConfig};
use costly::mcts::SearchLabel;
use costly::metrics;
use costly::net::{A2CSample, Adam, Checkpoint, Network};
use costly::synth;

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(&a, _)| a > 0.0).map(|(&a, &b)| a * (a / b).ln()).sum()
}

#[test]
fn distillation_descends_to_the_target_policy() {
    let mut net = Network::init(3, 2, 16, 7).unwrap();
    let state = vec![1.0, 0.0, 1.0, 0.4, 0.0, -0.7];
    let legal = vec![false, true, false, true, true];
    let target = vec![0.0, 0.6, 0.0, 0.3, 0.1];
    let label = SearchLabel { state: state.clone(), legal: legal.clone(), policy: target.clone(), value_target: 0.25 };
    let mut opt = Adam::new(net.params().len());
    let start = kl(&target, &net.forward(&state, &legal).unwrap().probs);
    for _ in 0..2000 {
        let (_, grad) = net.mcts_gradient(std::slice::from_ref(&label)).unwrap();
        net.apply_update(&grad, &mut opt, 1e-3).unwrap();
    }
    let out = net.forward(&state, &legal).unwrap();
    let end = kl(&target, &out.probs);
    assert!(end < 1e-3, "KL {start} -> {end}");
    assert!((out.value - 0.25).abs() < 1e-2);
    assert!(out.probs[0] == 0.0 && out.probs[2] == 0.0);
}

#[test]
fn positive_advantage_raises_the_taken_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..10 {
        let net = Network::init(3, 2, 16, trial).unwrap();
        let state: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let legal = vec![true; 5];
        let action = rng.gen_range(0..5);
        for sign in [1.0, -1.0] {
            let sample = A2CSample {
                state: state.clone(),
                legal: legal.clone(),
                action,
                advantage: sign,
                value_target: 0.0,
                entropy_weight: 0.0,
            };
            let (_, grad) = net.a2c_gradient(&[sample], 0.0).unwrap();
            let mut stepped = net.clone();
            stepped.params_mut().iter_mut().zip(&grad).for_each(|(p, g)| *p -= 1e-3 * g);
            let before = net.forward(&state, &legal).unwrap().probs[action];
            let after = stepped.forward(&state, &legal).unwrap().probs[action];
            assert_eq!(after > before, sign > 0.0, "trial {trial}, advantage {sign}");
        }
    }
}

#[test]
fn entropy_bonus_flattens_the_policy() {
    let mut net = Network::init(3, 2, 16, 1).unwrap();
    let state = vec![1.0, 1.0, 0.0, 2.0, -1.5, 0.0];
    let legal = vec![true; 5];
    let sample = A2CSample { state: state.clone(), legal: legal.clone(), action: 0, advantage: 0.0, value_target: 0.0, entropy_weight: 1.0 };
    let mut opt = Adam::new(net.params().len());
    let start = net.forward(&state, &legal).unwrap().entropy();
    for _ in 0..1000 {
        let (_, grad) = net.a2c_gradient(std::slice::from_ref(&sample), 0.0).unwrap();
        net.apply_update(&grad, &mut opt, 1e-3).unwrap();
    }
    let end = net.forward(&state, &legal).unwrap().entropy();
    assert!(end > start && end > 5f64.ln() - 1e-3, "{start} -> {end}");
}

#[test]
fn actor_critic_training_is_reproducible() {
    let ds = synth::single_informative(80, 2).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.05), None).unwrap();
    let cfg = A2CConfig { epochs: 3, hidden: 16, seed: 12, ..Default::default() };
    let a = a2c::train(&env, &env, &cfg).unwrap();
    let b = a2c::train(&env, &env, &cfg).unwrap();
    assert_eq!(a.network.params(), b.network.params());
    assert_eq!(a.log, b.log);
    assert_eq!(a.log.len(), 3);
    let other = a2c::train(&env, &env, &A2CConfig { seed: 13, ..cfg }).unwrap();
    assert_ne!(a.network.params(), other.network.params());
}

#[test]
fn actor_critic_learns_the_informative_feature() {
    let ds = synth::single_informative(400, 6).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.05), None).unwrap();
    let cfg = A2CConfig { epochs: 40, hidden: 32, seed: 1, eval_every: 5, ..Default::default() };
    let out = a2c::train(&env, &env, &cfg).unwrap();
    let report = metrics::evaluate(&out.network, &env).unwrap();
    assert!(report.accuracy > 0.9, "accuracy {}", report.accuracy);
    assert!(report.mean_cost < 0.5, "mean cost {}", report.mean_cost);
}

#[test]
fn evaluation_agrees_with_greedy_episodes() {
    let ds = synth::overlapping_binary(60, 2.0, 3).unwrap();
    let env = Environment::new(&ds, RewardConfig::balanced(0.1), None).unwrap();
    let net = Network::init(4, 2, 16, 5).unwrap();
    let report = metrics::evaluate(&net, &env).unwrap();
    let mut correct = 0;
    let mut cost = 0.0;
    for row in 0..ds.n_rows() {
        let d = metrics::decide(&net, &env, row).unwrap();
        let ep = a2c::run_episode(&env, row, &net, Mode::Greedy, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        assert_eq!(d.features.len() + 1, ep.len());
        correct += usize::from(d.prediction == ds.label(row));
        cost += d.cost;
    }
    let n = ds.n_rows() as f64;
    assert_eq!(report.n_rows, ds.n_rows());
    assert!((report.accuracy - correct as f64 / n).abs() < 1e-12);
    assert!((report.mean_cost - cost / n).abs() < 1e-12);
    assert!((report.objective - (report.accuracy - 0.1 * report.mean_cost)).abs() < 1e-12);
    assert_eq!(report.confusion.iter().flatten().sum::<usize>(), ds.n_rows());
}

#[test]
fn checkpoints_round_trip_bit_for_bit() {
    let net = Network::init(4, 3, 12, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    net.save(&path).unwrap();
    let back = Network::load(&path).unwrap();
    assert!(net.params().iter().zip(back.params()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(back.shape(), net.shape());
    assert_eq!(back.seed(), net.seed());

    let mut ck: Checkpoint = net.to_checkpoint();
    ck.params.pop();
    assert!(Network::from_checkpoint(ck).is_err());
    let mut ck = net.to_checkpoint();
    ck.version += 1;
    assert!(Network::from_checkpoint(ck).is_err());
}
