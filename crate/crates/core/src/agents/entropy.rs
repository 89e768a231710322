use alloc::vec;
use alloc::vec::Vec;

use super::{EpisodeHistory, IsPolicy};
use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, Response};
use crate::math;
use crate::rng::SimRng;

/// Equal-width bins on `[-1, 1]` used to estimate the entropy of a question.
pub const ENTROPY_BINS: usize = 21;
/// Tolerance at which a candidate is eliminated.
pub const TOLERANCE_THRESHOLD: f64 = 15.0;

/// Greedy maximum-entropy questioner with tolerance pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyAgent {
    entities: usize,
    questions: usize,
    /// Signed expectation `E_mn`, row-major `M x N`.
    expectations: Vec<f64>,
    pub threshold: f64,
}

/// Candidates and tolerances within one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyState {
    pub alive: Vec<bool>,
    pub tolerance: Vec<f64>,
}

impl EntropyAgent {
    pub fn new(kb: &KnowledgeBase) -> Self {
        let (m, n) = (kb.num_entities(), kb.num_questions());
        let mut expectations = Vec::with_capacity(m * n);
        for e in 0..m {
            for q in 0..n {
                expectations.push(kb.counts(e, q).signed_expectation());
            }
        }
        EntropyAgent {
            entities: m,
            questions: n,
            expectations,
            threshold: TOLERANCE_THRESHOLD,
        }
    }

    /// Build directly from an `M x N` expectation matrix.
    pub fn from_expectations(entities: usize, questions: usize, expectations: Vec<f64>) -> Result<Self> {
        if entities == 0 || questions == 0 || expectations.len() != entities * questions {
            return Err(Error::Shape(alloc::format!(
                "{} expectations for {entities}x{questions}",
                expectations.len()
            )));
        }
        Ok(EntropyAgent {
            entities,
            questions,
            expectations,
            threshold: TOLERANCE_THRESHOLD,
        })
    }

    pub fn expectation(&self, m: usize, n: usize) -> f64 {
        self.expectations[m * self.questions + n]
    }

    pub fn start(&self) -> EntropyState {
        EntropyState {
            alive: vec![true; self.entities],
            tolerance: vec![0.0; self.entities],
        }
    }

    /// Replay a history from a fresh state.
    pub fn replay(&self, history: &[(usize, Response)]) -> EntropyState {
        let mut s = self.start();
        for &(q, x) in history {
            self.update(&mut s, q, x);
        }
        s
    }

    /// Binned entropy of question `n` over the surviving candidates.
    pub fn question_entropy(&self, state: &EntropyState, n: usize) -> f64 {
        let mut bins = [0usize; ENTROPY_BINS];
        let mut total = 0usize;
        for m in (0..self.entities).filter(|&m| state.alive[m]) {
            bins[bin_of(self.expectation(m, n))] += 1;
            total += 1;
        }
        if total == 0 {
            return 0.0;
        }
        bins.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total as f64;
                -p * math::ln(p)
            })
            .sum()
    }

    /// Highest-entropy free question; ties go to the lowest index.
    pub fn select_question(&self, state: &EntropyState, asked: &[bool]) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for n in (0..self.questions).filter(|&n| !asked[n]) {
            let h = self.question_entropy(state, n);
            if best.map_or(true, |(_, b)| h > b) {
                best = Some((n, h));
            }
        }
        best.map(|(n, _)| n).ok_or(Error::NoQuestionsLeft)
    }

    /// Add `|E_mc - x_c|` to every candidate's tolerance and drop those at
    /// the threshold, always keeping at least one candidate.
    pub fn update(&self, state: &mut EntropyState, q: usize, x: Response) {
        let xv = x.signed_value();
        for m in 0..self.entities {
            if state.alive[m] {
                state.tolerance[m] += (self.expectation(m, q) - xv).abs();
            }
        }
        let doomed: Vec<usize> = (0..self.entities)
            .filter(|&m| state.alive[m] && state.tolerance[m] >= self.threshold)
            .collect();
        let survivors = state.alive.iter().filter(|&&a| a).count();
        if doomed.len() == survivors {
            // Keep the least-penalised candidate (lowest index on ties).
            let keep = doomed
                .iter()
                .copied()
                .fold(None::<usize>, |b, m| match b {
                    Some(k) if state.tolerance[k] <= state.tolerance[m] => Some(k),
                    _ => Some(m),
                });
            for m in doomed {
                if Some(m) != keep {
                    state.alive[m] = false;
                }
            }
        } else {
            for m in doomed {
                state.alive[m] = false;
            }
        }
    }

    /// Surviving candidate with the smallest tolerance; ties to the lowest index.
    pub fn guess_from(&self, state: &EntropyState) -> usize {
        let mut best: Option<usize> = None;
        for m in (0..self.entities).filter(|&m| state.alive[m]) {
            if best.map_or(true, |b| state.tolerance[m] < state.tolerance[b]) {
                best = Some(m);
            }
        }
        best.unwrap_or(0)
    }
}

fn bin_of(v: f64) -> usize {
    let idx = math::floor((v + 1.0) / 2.0 * ENTROPY_BINS as f64);
    (idx.max(0.0) as usize).min(ENTROPY_BINS - 1)
}

impl IsPolicy for EntropyAgent {
    fn num_questions(&self) -> usize {
        self.questions
    }

    fn select(&self, history: &EpisodeHistory, _epsilon: f64, _rng: &mut SimRng) -> Result<usize> {
        let s = self.replay(history.steps());
        self.select_question(&s, history.asked_mask())
    }

    fn guess(&self, history: &EpisodeHistory, _kb: &KnowledgeBase) -> Result<usize> {
        Ok(self.guess_from(&self.replay(history.steps())))
    }
}
