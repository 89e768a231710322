//! Core algorithms for a 20 Questions agent that both identifies a hidden
//! entity and fills gaps in its own knowledge base while playing.
//!
//! The crate is `no_std` and only needs an allocator. Everything that touches
//! files, the network or the clock lives in the `twentyq` companion crate.
//!
//! Layout:
//!
//! - [`kb`]: the entity-question matrix with count-based multinoulli entries,
//!   the KB distance metric and a seeded synthetic generator.
//! - [`sim`]: the player simulator (target and response sampling, holdout).
//! - [`nn`]: dense layers, embeddings, an LSTM cell, MSE and Adam.
//! - [`guesser`]: naive-Bayes posterior over entities.
//! - [`agents`]: information-seeking policies (DQN, DRQN, linear, entropy)
//!   and the Q-learning training loop.
//! - [`ka`]: GMF-guided knowledge acquisition and its baselines.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod error;
pub mod guesser;
pub mod ka;
pub mod kb;
pub mod math;
pub mod nn;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use kb::{EntryCounts, KnowledgeBase, Response};
