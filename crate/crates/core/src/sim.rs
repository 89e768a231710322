//! Player simulator: picks a target by popularity, answers questions by
//! sampling the ground-truth entry, and judges the final guess.

use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, Response};
use crate::math;
use crate::rng::{self, SimRng};

/// A simulated player with a fixed ground-truth knowledge base.
#[derive(Debug, Clone)]
pub struct SimulatorWorld<'a> {
    truth: &'a KnowledgeBase,
    targets: WeightedIndex<f64>,
    rng: SimRng,
}

impl<'a> SimulatorWorld<'a> {
    pub fn new(truth: &'a KnowledgeBase, seed: u64) -> Self {
        let weights = truth.entities().iter().map(|e| e.popularity);
        // KnowledgeBase guarantees at least one entity with positive, finite popularity.
        let targets = WeightedIndex::new(weights).expect("popularity is positive");
        SimulatorWorld {
            truth,
            targets,
            rng: rng::seeded(seed),
        }
    }

    pub fn truth(&self) -> &'a KnowledgeBase {
        self.truth
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = rng::seeded(seed);
    }

    /// Draw a target with probability proportional to popularity.
    pub fn sample_target(&mut self) -> usize {
        self.targets.sample(&mut self.rng)
    }

    /// Answer `question` about `target` by sampling its truth entry.
    pub fn respond(&mut self, target: usize, question: usize) -> Response {
        let p = self.truth.distribution(target, question);
        let u = self.rng.gen::<f64>();
        if u < p[0] {
            Response::Yes
        } else if u < p[0] + p[1] {
            Response::No
        } else {
            Response::Unknown
        }
    }
}

/// The agent wins iff its guess is the target.
pub fn judge(target: usize, guess: usize) -> bool {
    target == guess
}

/// An agent KB with part of the truth's known entries removed.
#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub agent_kb: KnowledgeBase,
    pub truth_kb: KnowledgeBase,
    pub holdout_fraction: f64,
    /// Entries that were demoted to missing in `agent_kb`.
    pub removed: Vec<(usize, usize)>,
}

/// Demote `round(fraction * known)` uniformly chosen known entries to missing.
pub fn make_holdout(truth: &KnowledgeBase, fraction: f64, seed: u64) -> Result<HoldoutSplit> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(alloc::format!(
            "holdout fraction must be in [0, 1), got {fraction}"
        )));
    }
    let known: Vec<(usize, usize)> = truth.known_entries().map(|(k, _)| k).collect();
    let remove = math::round(fraction * known.len() as f64) as usize;
    let mut rng = rng::seeded(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, known.len(), remove).into_vec();
    picked.sort_unstable();
    let mut agent = truth.clone();
    let removed: Vec<(usize, usize)> = picked.into_iter().map(|i| known[i]).collect();
    for &(m, n) in &removed {
        agent.clear_entry(m, n)?;
    }
    Ok(HoldoutSplit {
        agent_kb: agent,
        truth_kb: truth.clone(),
        holdout_fraction: fraction,
        removed,
    })
}
