//! Naive-Bayes identification of the target from collected responses.
//!
//! `log P(g | X) = log P0(g) + sum_t log P(x_t | g) - log Z`, with `P0` the
//! popularity prior and `P(x_t | g)` read from the KB entry (1/3 for missing
//! entries). Everything stays in log space until the final normalization.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kb::{KnowledgeBase, Response};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct GuessResult {
    pub posterior: Vec<f64>,
    pub guess: usize,
    /// Unnormalized log scores, `log P0(g) + sum_t log P(x_t | g)`.
    pub log_scores: Vec<f64>,
}

pub fn posterior(history: &[(usize, Response)], kb: &KnowledgeBase) -> Result<GuessResult> {
    posterior_with_prior(history, kb, &kb.popularity_prior())
}

pub fn posterior_with_prior(
    history: &[(usize, Response)],
    kb: &KnowledgeBase,
    prior: &[f64],
) -> Result<GuessResult> {
    if kb.num_entities() == 0 || prior.is_empty() {
        return Err(Error::NoEntities);
    }
    if prior.len() != kb.num_entities() {
        return Err(Error::Shape(alloc::format!(
            "prior has {} entries for {} entities",
            prior.len(),
            kb.num_entities()
        )));
    }
    let total: f64 = prior.iter().sum();
    let mut log_scores: Vec<f64> = prior.iter().map(|&p| math::ln(p / total)).collect();
    for &(q, x) in history {
        if q >= kb.num_questions() {
            return Err(Error::OutOfRange {
                what: "question",
                index: q,
                len: kb.num_questions(),
            });
        }
        for (m, score) in log_scores.iter_mut().enumerate() {
            *score += math::ln(kb.distribution(m, q)[x.code()]);
        }
    }
    let z = math::log_sum_exp(&log_scores);
    let posterior: Vec<f64> = log_scores.iter().map(|&s| math::exp(s - z)).collect();
    let guess = guess(&posterior);
    Ok(GuessResult {
        posterior,
        guess,
        log_scores,
    })
}

/// Lowest-index argmax of the posterior.
pub fn guess(posterior: &[f64]) -> usize {
    math::argmax(posterior).unwrap_or(0)
}
