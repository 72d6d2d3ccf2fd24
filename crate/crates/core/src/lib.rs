//! Cost-sensitive sequential feature acquisition.
//!
//! An agent inspects the features of one sample at a time, paying a cost for
//! each, and finishes by predicting a class. The policy is a partially shared
//! policy/value network trained first with advantage actor-critic ([`a2c`])
//! and then refined by neural tree search ([`mcts`]). High-traffic search
//! paths can be aggregated into a readable decision diagram ([`rules`]).

pub mod a2c;
pub mod data;
pub mod env;
mod error;
pub mod mcts;
pub mod metrics;
pub mod net;
pub mod rules;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
