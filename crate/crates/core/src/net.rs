//! Partially shared policy/value network with hand-derived gradients.
//!
//! Three fully connected rectifier layers form a trunk that feeds two linear
//! heads: `p + K` action logits and one scalar state value. All parameters
//! live in one flat vector laid out layer by layer (weights row-major
//! `out × in`, then biases), in the order trunk 1..3, policy head, value head.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mcts::SearchLabel;
use crate::seed;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "costly-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub n_inputs: usize,
    pub hidden: usize,
    pub n_actions: usize,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    fn biases(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }

    fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }
}

impl NetShape {
    pub fn new(n_features: usize, n_classes: usize, hidden: usize) -> Self {
        Self { n_inputs: 2 * n_features, hidden, n_actions: n_features + n_classes }
    }

    fn layers(&self) -> [Layer; 5] {
        let dims = [
            (self.n_inputs, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.hidden),
            (self.hidden, self.n_actions),
            (self.hidden, 1),
        ];
        let mut offset = 0;
        dims.map(|(fan_in, fan_out)| {
            let layer = Layer { fan_in, fan_out, offset };
            offset += layer.len();
            layer
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(Layer::len).sum()
    }

    /// Names and flat ranges of every parameter block.
    pub fn blocks(&self) -> Vec<(&'static str, std::ops::Range<usize>)> {
        let names = [
            ("trunk1.weight", "trunk1.bias"),
            ("trunk2.weight", "trunk2.bias"),
            ("trunk3.weight", "trunk3.bias"),
            ("policy.weight", "policy.bias"),
            ("value.weight", "value.bias"),
        ];
        self.layers()
            .iter()
            .zip(names)
            .flat_map(|(l, (w, b))| [(w, l.weights()), (b, l.biases())])
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.hidden == 0 || self.n_actions == 0 {
            return Err(Error::validation(format!("degenerate network shape {self:?}")));
        }
        Ok(())
    }
}

/// Output of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub logits: Vec<f64>,
    /// Masked softmax: exactly zero on illegal actions.
    pub probs: Vec<f64>,
    pub value: f64,
}

impl PolicyValue {
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    /// Most probable action, lowest index on ties.
    pub fn greedy_action(&self, legal: &[bool]) -> usize {
        let mut best = None;
        for (a, (&p, &ok)) in self.probs.iter().zip(legal).enumerate() {
            if ok && best.is_none_or(|(_, bp)| p > bp) {
                best = Some((a, p));
            }
        }
        best.map(|(a, _)| a).expect("at least one legal action")
    }
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// Softmax over legal entries only; illegal entries get probability 0.
pub fn masked_softmax(logits: &[f64], legal: &[bool]) -> Result<Vec<f64>> {
    let max = logits
        .iter()
        .zip(legal)
        .filter(|(_, &ok)| ok)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::contract("no legal action"));
    }
    let mut probs: Vec<f64> = logits
        .iter()
        .zip(legal)
        .map(|(&z, &ok)| if ok { (z - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// One actor-critic training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct A2CSample {
    pub state: Vec<f64>,
    pub legal: Vec<bool>,
    pub action: usize,
    /// TD error, treated as a constant.
    pub advantage: f64,
    /// Regression target `r + γ V(s')` for the value head, held constant.
    pub value_target: f64,
    pub entropy_weight: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Trace {
    h1: Vec<f64>,
    h2: Vec<f64>,
    h3: Vec<f64>,
    logits: Vec<f64>,
    value: f64,
}

fn dense(params: &[f64], layer: Layer, input: &[f64], relu: bool) -> Vec<f64> {
    let w = &params[layer.weights()];
    let b = &params[layer.biases()];
    (0..layer.fan_out)
        .map(|o| {
            let row = &w[o * layer.fan_in..(o + 1) * layer.fan_in];
            let z = b[o] + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
            if relu {
                z.max(0.0)
            } else {
                z
            }
        })
        .collect()
}

/// Accumulates the parameter gradient of one dense layer and returns the
/// gradient with respect to its input.
fn dense_backward(
    params: &[f64],
    layer: Layer,
    input: &[f64],
    d_out: &[f64],
    grad: &mut [f64],
) -> Vec<f64> {
    let mut d_in = vec![0.0; layer.fan_in];
    let w = &params[layer.weights()];
    let (gw, gb) = grad[layer.offset..layer.offset + layer.len()].split_at_mut(layer.fan_in * layer.fan_out);
    for (o, &d) in d_out.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        gb[o] += d;
        let row = o * layer.fan_in..(o + 1) * layer.fan_in;
        for ((g, &x), (di, &wv)) in gw[row.clone()].iter_mut().zip(input).zip(d_in.iter_mut().zip(&w[row])) {
            *g += d * x;
            *di += d * wv;
        }
    }
    d_in
}

fn relu_mask(d: &mut [f64], activation: &[f64]) {
    for (g, &a) in d.iter_mut().zip(activation) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    shape: NetShape,
    seed: u64,
    params: Vec<f64>,
}

impl Network {
    /// Seeded initialization: uniform weights with variance `2 / fan_in`,
    /// zero biases.
    pub fn init(n_features: usize, n_classes: usize, hidden: usize, seed: u64) -> Result<Self> {
        if n_features == 0 || n_classes == 0 || hidden == 0 {
            return Err(Error::validation("network dimensions must be >= 1"));
        }
        let shape = NetShape::new(n_features, n_classes, hidden);
        let mut rng = seed::rng(seed);
        let mut params = vec![0.0; shape.param_count()];
        for layer in shape.layers() {
            let bound = (6.0 / layer.fan_in as f64).sqrt();
            for w in &mut params[layer.weights()] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(Self { shape, seed, params })
    }

    pub fn from_params(shape: NetShape, seed: u64, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.param_count() {
            return Err(Error::validation(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                params.len()
            )));
        }
        check_finite(&params, "network parameters")?;
        Ok(Self { shape, seed, params })
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let [l1, l2, l3, lp, lv] = self.shape.layers();
        let h1 = dense(&self.params, l1, x, true);
        let h2 = dense(&self.params, l2, &h1, true);
        let h3 = dense(&self.params, l3, &h2, true);
        let logits = dense(&self.params, lp, &h3, false);
        let value = dense(&self.params, lv, &h3, false)[0];
        Trace { h1, h2, h3, logits, value }
    }

    fn check_input(&self, x: &[f64], legal: &[bool]) -> Result<()> {
        if x.len() != self.shape.n_inputs {
            return Err(Error::contract(format!(
                "state has length {}, network expects {}",
                x.len(),
                self.shape.n_inputs
            )));
        }
        if legal.len() != self.shape.n_actions {
            return Err(Error::contract(format!(
                "legal mask has length {}, network expects {}",
                legal.len(),
                self.shape.n_actions
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], legal: &[bool]) -> Result<PolicyValue> {
        self.check_input(x, legal)?;
        let t = self.trace(x);
        let probs = masked_softmax(&t.logits, legal)?;
        Ok(PolicyValue { logits: t.logits, probs, value: t.value })
    }

    /// Forward pass that keeps the activations for a later backward pass.
    pub(crate) fn forward_traced(&self, x: &[f64], legal: &[bool]) -> Result<(Trace, PolicyValue)> {
        self.check_input(x, legal)?;
        let t = self.trace(x);
        let probs = masked_softmax(&t.logits, legal)?;
        let out = PolicyValue { logits: t.logits.clone(), probs, value: t.value };
        Ok((t, out))
    }

    /// State value only.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.shape.n_inputs {
            return Err(Error::contract("state length does not match network input"));
        }
        Ok(self.trace(x).value)
    }

    fn backward(&self, x: &[f64], t: &Trace, d_logits: &[f64], d_value: f64, grad: &mut [f64]) {
        let [l1, l2, l3, lp, lv] = self.shape.layers();
        let mut d3 = dense_backward(&self.params, lp, &t.h3, d_logits, grad);
        let dv = dense_backward(&self.params, lv, &t.h3, &[d_value], grad);
        d3.iter_mut().zip(dv).for_each(|(a, b)| *a += b);
        relu_mask(&mut d3, &t.h3);
        let mut d2 = dense_backward(&self.params, l3, &t.h2, &d3, grad);
        relu_mask(&mut d2, &t.h2);
        let mut d1 = dense_backward(&self.params, l2, &t.h1, &d2, grad);
        relu_mask(&mut d1, &t.h1);
        dense_backward(&self.params, l1, x, &d1, grad);
    }

    fn check_a2c(&self, s: &A2CSample) -> Result<()> {
        self.check_input(&s.state, &s.legal)?;
        check_finite(&s.state, "a2c state")?;
        check_finite(&[s.advantage, s.value_target, s.entropy_weight], "a2c sample scalars")?;
        if !s.legal.get(s.action).copied().unwrap_or(false) {
            return Err(Error::contract(format!("action {} is not legal", s.action)));
        }
        Ok(())
    }

    /// Summed actor-critic loss
    /// `−log π(a|s)·adv − β·H(π(s)) + w·(target − V(s))²`.
    pub fn a2c_loss(&self, batch: &[A2CSample], value_weight: f64) -> Result<f64> {
        let mut loss = 0.0;
        for s in batch {
            self.check_a2c(s)?;
            let out = self.forward(&s.state, &s.legal)?;
            loss += -out.probs[s.action].ln() * s.advantage - s.entropy_weight * out.entropy()
                + value_weight * (s.value_target - out.value).powi(2);
        }
        Ok(loss)
    }

    /// Loss and gradient of [`Network::a2c_loss`].
    pub fn a2c_gradient(&self, batch: &[A2CSample], value_weight: f64) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for s in batch {
            self.check_a2c(s)?;
            let t = self.trace(&s.state);
            let probs = masked_softmax(&t.logits, &s.legal)?;
            loss += self.a2c_accumulate(s, &t, &probs, value_weight, &mut grad);
        }
        check_finite(&grad, "a2c gradient")?;
        Ok((loss, grad))
    }

    /// Adds the gradient of one sample's loss to `grad` given its forward
    /// trace, and returns the loss.
    pub(crate) fn a2c_accumulate(
        &self,
        s: &A2CSample,
        t: &Trace,
        probs: &[f64],
        value_weight: f64,
        grad: &mut [f64],
    ) -> f64 {
        let h = entropy(probs);
        let log_pa = probs[s.action].ln();
        let loss = -log_pa * s.advantage - s.entropy_weight * h
            + value_weight * (s.value_target - t.value).powi(2);

        // d/dz_j of −adv·log π_a is adv·(π_j − 1[j=a]);
        // d/dz_j of −β·H is β·π_j·(log π_j + H)
        let d_logits: Vec<f64> = probs
            .iter()
            .zip(&s.legal)
            .enumerate()
            .map(|(j, (&pj, &ok))| {
                if !ok {
                    return 0.0;
                }
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                let ent = if pj > 0.0 { s.entropy_weight * pj * (pj.ln() + h) } else { 0.0 };
                s.advantage * (pj - onehot) + ent
            })
            .collect();
        let d_value = -2.0 * value_weight * (s.value_target - t.value);
        self.backward(&s.state, t, &d_logits, d_value, grad);
        loss
    }

    pub(crate) fn check_grad(grad: &[f64]) -> Result<()> {
        check_finite(grad, "gradient")
    }

    fn check_label(&self, s: &SearchLabel) -> Result<()> {
        self.check_input(&s.state, &s.legal)?;
        check_finite(&s.state, "search label state")?;
        check_finite(&s.policy, "search label policy")?;
        if !s.value_target.is_finite() {
            return Err(Error::NonFinite("search label value target".into()));
        }
        if s.policy.len() != self.shape.n_actions {
            return Err(Error::validation("search policy length mismatch"));
        }
        let total: f64 = s.policy.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!("search policy sums to {total}")));
        }
        if s.policy.iter().zip(&s.legal).any(|(&p, &ok)| p < 0.0 || (!ok && p != 0.0)) {
            return Err(Error::validation("search policy has mass on illegal actions"));
        }
        Ok(())
    }

    /// Summed distillation loss `(z − V(s))² − Σ_a π^M(a)·log π(a|s)`.
    pub fn mcts_loss(&self, batch: &[SearchLabel]) -> Result<f64> {
        let mut loss = 0.0;
        for s in batch {
            self.check_label(s)?;
            let out = self.forward(&s.state, &s.legal)?;
            let ce: f64 = s
                .policy
                .iter()
                .zip(&out.probs)
                .filter(|(&m, _)| m > 0.0)
                .map(|(&m, &p)| -m * p.ln())
                .sum();
            loss += (s.value_target - out.value).powi(2) + ce;
        }
        Ok(loss)
    }

    /// Loss and gradient of [`Network::mcts_loss`].
    pub fn mcts_gradient(&self, batch: &[SearchLabel]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for s in batch {
            self.check_label(s)?;
            let t = self.trace(&s.state);
            let probs = masked_softmax(&t.logits, &s.legal)?;
            let ce: f64 = s
                .policy
                .iter()
                .zip(&probs)
                .filter(|(&m, _)| m > 0.0)
                .map(|(&m, &p)| -m * p.ln())
                .sum();
            loss += (s.value_target - t.value).powi(2) + ce;
            let d_logits: Vec<f64> = probs
                .iter()
                .zip(&s.policy)
                .zip(&s.legal)
                .map(|((&p, &m), &ok)| if ok { p - m } else { 0.0 })
                .collect();
            let d_value = -2.0 * (s.value_target - t.value);
            self.backward(&s.state, &t, &d_logits, d_value, &mut grad);
        }
        check_finite(&grad, "mcts gradient")?;
        Ok((loss, grad))
    }

    /// One optimizer step in the descent direction of `grad`.
    pub fn apply_update(&mut self, grad: &[f64], opt: &mut Adam, lr: f64) -> Result<()> {
        opt.step(&mut self.params, grad, lr)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            shape: self.shape,
            seed: self.seed,
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::validation(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        Self::from_params(ck.shape, ck.seed, ck.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint().to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint(Checkpoint::from_json(&text)?)
    }
}

/// Serialized parameters. Stored as one JSON object; floats use the
/// shortest representation that parses back to the same bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub shape: NetShape,
    pub seed: u64,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Adaptive moment estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Descent step. A non-finite gradient is rejected before anything is
    /// modified.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::contract("optimizer, parameter and gradient sizes differ"));
        }
        check_finite(grad, "gradient")?;
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let (inv_bc1, inv_bc2) = (1.0 / bc1, 1.0 / bc2);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            // moments of dead units decay geometrically; subnormals are very slow
            *m = if m.abs() < f64::MIN_POSITIVE { 0.0 } else { *m };
            *v = if *v < f64::MIN_POSITIVE { 0.0 } else { *v };
            *p -= lr * (*m * inv_bc1) / ((*v * inv_bc2).sqrt() + eps);
        }
        Ok(())
    }
}
