//! Knowledge acquisition.
//!
//! A GMF model scores how likely each entry is to be known; candidates for a
//! guessed entity are sampled in proportion to `1/sqrt(N_mn)` and the best
//! scoring one is asked. Responses collect in a buffer that is committed to
//! the KB once full. Two baselines drop one half of that rule: uncertainty
//! only (random candidate) and value only (best score over all questions).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::agents::{EpisodeHistory, IsPolicy};
use crate::error::{Error, Result};
use crate::kb::{kb_distance, EntryCounts, IndicatorMatrix, KnowledgeBase, Response};
use crate::math;
use crate::nn::{Adam, Parameters, Tensor};
use crate::rng::{self, SimRng};
use crate::sim::{judge, SimulatorWorld};

/// `score(m, n) = sigmoid(h . (U_m * V_n))`. `v` is stored question-major
/// (`N x K`) so a question's factors are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct GmfModel {
    pub u: Tensor,
    pub v: Tensor,
    pub h: Tensor,
}

impl GmfModel {
    pub fn new(entities: usize, questions: usize, k: usize, rng: &mut SimRng) -> Self {
        let bound = 1.0 / math::sqrt(k.max(1) as f64);
        GmfModel {
            u: Tensor::uniform(&[entities, k], 1.0, rng),
            v: Tensor::uniform(&[questions, k], 1.0, rng),
            h: Tensor::uniform(&[k], bound, rng),
        }
    }

    pub fn zeros(entities: usize, questions: usize, k: usize) -> Self {
        GmfModel {
            u: Tensor::zeros(&[entities, k]),
            v: Tensor::zeros(&[questions, k]),
            h: Tensor::zeros(&[k]),
        }
    }

    pub fn entities(&self) -> usize {
        self.u.shape()[0]
    }

    pub fn questions(&self) -> usize {
        self.v.shape()[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.h.len()
    }

    fn logit(&self, m: usize, n: usize) -> f64 {
        let (u, v) = (self.u.row(m), self.v.row(n));
        self.h.data().iter().zip(u).zip(v).map(|((h, a), b)| h * a * b).sum()
    }

    pub fn score(&self, m: usize, n: usize) -> f64 {
        math::sigmoid(self.logit(m, n))
    }

    /// Add `dscore * d score(m, n)` into `grad`.
    pub fn score_backward(&self, m: usize, n: usize, dscore: f64, grad: &mut GmfModel) {
        let s = self.score(m, n);
        let dz = dscore * s * (1.0 - s);
        let k = self.latent_dim();
        for i in 0..k {
            let (h, a, b) = (self.h.data()[i], self.u.row(m)[i], self.v.row(n)[i]);
            grad.h.data_mut()[i] += dz * a * b;
            grad.u.row_mut(m)[i] += dz * h * b;
            grad.v.row_mut(n)[i] += dz * h * a;
        }
    }
}

impl Parameters for GmfModel {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.u, &self.v, &self.h]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.u, &mut self.v, &mut self.h]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["u".into(), "v".into(), "h".into()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmfConfig {
    pub latent_dim: usize,
    pub lr: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for GmfConfig {
    fn default() -> Self {
        GmfConfig {
            latent_dim: 48,
            lr: 1e-3,
            negatives: 4,
            epochs: 20,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// Fit a fresh GMF model to `y`. Each epoch visits every positive once,
/// pairs it with `negatives` uniformly drawn zero entries and takes Adam
/// steps on minibatches of squared error. Returns the model and the mean
/// squared error of each epoch.
pub fn gmf_train(y: &IndicatorMatrix, config: &GmfConfig) -> Result<(GmfModel, Vec<f64>)> {
    let (rows, cols) = (y.rows, y.cols);
    let positives: Vec<(usize, usize)> = (0..rows)
        .flat_map(|m| (0..cols).map(move |n| (m, n)))
        .filter(|&(m, n)| y.get(m, n))
        .collect();
    if positives.is_empty() {
        return Err(Error::EmptyIndicator);
    }
    if config.latent_dim == 0 || config.batch_size == 0 || !(config.lr > 0.0) {
        return Err(Error::InvalidParameter("gmf needs latent_dim, batch_size and lr > 0".into()));
    }
    let has_negatives = positives.len() < rows * cols;
    let mut rng = rng::seeded(config.seed);
    let mut model = GmfModel::new(rows, cols, config.latent_dim, &mut rng);
    let mut adam = Adam::new(config.lr);
    let mut grad = GmfModel::zeros(rows, cols, config.latent_dim);
    let mut order = positives.clone();
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut samples: Vec<(usize, usize, f64)> = Vec::with_capacity(order.len() * (1 + config.negatives));
        for &(m, n) in &order {
            samples.push((m, n, 1.0));
            if has_negatives {
                for _ in 0..config.negatives {
                    loop {
                        let (a, b) = (rng.gen_range(0..rows), rng.gen_range(0..cols));
                        if !y.get(a, b) {
                            samples.push((a, b, 0.0));
                            break;
                        }
                    }
                }
            }
        }
        let mut total = 0.0;
        for batch in samples.chunks(config.batch_size) {
            grad.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &(m, n, target) in batch {
                let err = model.score(m, n) - target;
                total += err * err;
                model.score_backward(m, n, 2.0 * err * scale, &mut grad);
            }
            adam.step(&mut model, &grad)?;
        }
        losses.push(total / samples.len() as f64);
    }
    Ok((model, losses))
}

/// Sampling weights `1/sqrt(N_mn)` for entity `m`; zero for rejected and
/// already-asked questions.
pub fn uncertainty_weights(kb: &KnowledgeBase, m: usize, asked: &[bool]) -> Vec<f64> {
    (0..kb.num_questions())
        .map(|n| {
            if asked.get(n).copied().unwrap_or(false) || kb.is_rejected(m, n) {
                0.0
            } else {
                1.0 / math::sqrt(kb.counts(m, n).total() as f64)
            }
        })
        .collect()
}

/// Draw up to `n_c` distinct indices, each draw proportional to the
/// remaining weights. Returns every positive-weight index when fewer exist.
pub fn sample_candidates(weights: &[f64], n_c: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut w: Vec<f64> = weights.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    let mut out = Vec::with_capacity(n_c);
    while out.len() < n_c {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut pick = None;
        for (i, &x) in w.iter().enumerate() {
            if x <= 0.0 {
                continue;
            }
            pick = Some(i);
            if u < x {
                break;
            }
            u -= x;
        }
        let i = pick.expect("total > 0");
        out.push(i);
        w[i] = 0.0;
    }
    out
}

/// How the KA question is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaSelector {
    /// Sample candidates by uncertainty, ask the best GMF score.
    LaGmf,
    /// Sample candidates by uncertainty, ask a random one.
    UncertaintyOnly,
    /// Ask the best GMF score over every free question.
    ValueOnly,
}

impl KaSelector {
    pub fn name(self) -> &'static str {
        match self {
            KaSelector::LaGmf => "la-gmf",
            KaSelector::UncertaintyOnly => "uncertainty-only",
            KaSelector::ValueOnly => "value-only",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "la-gmf" => Some(KaSelector::LaGmf),
            "uncertainty-only" => Some(KaSelector::UncertaintyOnly),
            "value-only" => Some(KaSelector::ValueOnly),
            _ => None,
        }
    }
}

/// Highest-scoring question in `candidates`; ties go to the lowest index.
pub fn top_scored(model: &GmfModel, m: usize, candidates: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &n in candidates {
        let s = model.score(m, n);
        match best {
            Some((b, bs)) if s < bs || (s == bs && b < n) => {}
            _ => best = Some((n, s)),
        }
    }
    best.map(|(n, _)| n)
}

/// Pick the next KA question for entity `m`, or `None` if nothing is askable.
pub fn select_ka_question(
    selector: KaSelector,
    model: &GmfModel,
    kb: &KnowledgeBase,
    m: usize,
    asked: &[bool],
    n_c: usize,
    rng: &mut SimRng,
) -> Option<usize> {
    let weights = uncertainty_weights(kb, m, asked);
    match selector {
        KaSelector::LaGmf => top_scored(model, m, &sample_candidates(&weights, n_c, rng)),
        KaSelector::UncertaintyOnly => {
            let c = sample_candidates(&weights, n_c, rng);
            c.choose(rng).copied()
        }
        KaSelector::ValueOnly => {
            let free: Vec<usize> = (0..weights.len()).filter(|&n| weights[n] > 0.0).collect();
            top_scored(model, m, &free)
        }
    }
}

/// Ask up to `t2` KA questions about the guessed entity `guess` of an
/// episode whose history already excludes the IS questions. The responses
/// come from the player's actual `target`.
#[allow(clippy::too_many_arguments)]
pub fn ka_phase(
    selector: KaSelector,
    model: &GmfModel,
    kb: &KnowledgeBase,
    guess: usize,
    history: &mut EpisodeHistory,
    t2: usize,
    n_c: usize,
    world: &mut SimulatorWorld<'_>,
    target: usize,
    rng: &mut SimRng,
) -> Result<Vec<(usize, Response)>> {
    let mut asked = Vec::with_capacity(t2);
    for _ in 0..t2 {
        let Some(q) = select_ka_question(selector, model, kb, guess, history.asked_mask(), n_c, rng) else {
            break;
        };
        let x = world.respond(target, q);
        history.push(q, x)?;
        asked.push((q, x));
    }
    Ok(asked)
}

/// One collected KA response, attributed to the guessed entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KaRecord {
    pub entity: usize,
    pub question: usize,
    pub response: Response,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KaBuffer {
    capacity: usize,
    records: Vec<KaRecord>,
}

impl KaBuffer {
    pub fn new(capacity: usize) -> Self {
        KaBuffer {
            capacity,
            records: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.records.len() >= self.capacity
    }

    pub fn records(&self) -> &[KaRecord] {
        &self.records
    }

    /// Append a record; refuses once full.
    pub fn push(&mut self, record: KaRecord) -> Result<()> {
        if self.is_full() {
            return Err(Error::InvalidParameter(alloc::format!(
                "ka buffer is full ({} records)",
                self.capacity
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn drain(&mut self) -> Vec<KaRecord> {
        core::mem::take(&mut self.records)
    }
}

/// Entries with many responses, mostly "unknown", are not worth asking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectRule {
    pub min_total: u32,
    pub unknown_fraction: f64,
}

impl Default for RejectRule {
    fn default() -> Self {
        RejectRule {
            min_total: 15,
            unknown_fraction: 0.8,
        }
    }
}

pub fn reject_check(counts: EntryCounts, rule: &RejectRule) -> bool {
    let total = counts.total();
    total >= rule.min_total && counts.unknown as f64 / total as f64 > rule.unknown_fraction
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommitSummary {
    pub committed: usize,
    pub discarded_wrong_guess: usize,
    pub newly_rejected: usize,
}

/// Apply buffered records to `kb` and empty the buffer. Records from wrong
/// guesses are dropped unless `commit_all`. Touched entries are then checked
/// against the rejection rule.
pub fn commit_buffer(
    buffer: &mut KaBuffer,
    kb: &mut KnowledgeBase,
    commit_all: bool,
    rule: &RejectRule,
) -> Result<CommitSummary> {
    let mut summary = CommitSummary::default();
    let mut touched: Vec<(usize, usize)> = Vec::new();
    for r in buffer.drain() {
        if !r.correct && !commit_all {
            summary.discarded_wrong_guess += 1;
            continue;
        }
        kb.update_entry(r.entity, r.question, r.response)?;
        touched.push((r.entity, r.question));
        summary.committed += 1;
    }
    touched.sort_unstable();
    touched.dedup();
    for (m, n) in touched {
        if !kb.is_rejected(m, n) && reject_check(kb.counts(m, n), rule) {
            kb.reject(m, n)?;
            summary.newly_rejected += 1;
        }
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KaRunConfig {
    pub t1: usize,
    pub t2: usize,
    pub n_c: usize,
    pub buffer_size: usize,
    pub cycles: usize,
    pub selector: KaSelector,
    pub gmf: GmfConfig,
    pub reject: RejectRule,
    pub commit_all: bool,
    pub seed: u64,
}

impl Default for KaRunConfig {
    fn default() -> Self {
        KaRunConfig {
            t1: 17,
            t2: 3,
            n_c: 32,
            buffer_size: 3000,
            cycles: 10,
            selector: KaSelector::LaGmf,
            gmf: GmfConfig::default(),
            reject: RejectRule::default(),
            commit_all: false,
            seed: 0,
        }
    }
}

/// State of the agent KB after a cycle (cycle 0 is the starting point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRow {
    pub cycle: usize,
    pub kb_size: usize,
    pub kb_distance: f64,
    pub committed: usize,
    pub discarded_wrong_guess: usize,
    pub rejected_total: usize,
    /// Greedy IS wins during the cycle's episodes.
    pub episodes: usize,
    pub wins: usize,
}

/// Run `cycles` KA cycles with a frozen IS policy, updating `agent_kb` in
/// place. Each cycle refits GMF, plays episodes until the buffer fills, then
/// commits.
pub fn run_ka_cycles<P: IsPolicy + ?Sized>(
    policy: &P,
    agent_kb: &mut KnowledgeBase,
    truth: &KnowledgeBase,
    config: &KaRunConfig,
) -> Result<Vec<CycleRow>> {
    agent_kb.same_shape(truth)?;
    if config.t1 + config.t2 > agent_kb.num_questions() {
        return Err(Error::InvalidParameter(alloc::format!(
            "t1 + t2 = {} exceeds {} questions",
            config.t1 + config.t2,
            agent_kb.num_questions()
        )));
    }
    if config.t2 > 0 && config.buffer_size == 0 {
        return Err(Error::InvalidParameter("buffer size must be positive".into()));
    }
    let mut rows = vec![CycleRow {
        cycle: 0,
        kb_size: agent_kb.known_count(),
        kb_distance: kb_distance(agent_kb, truth)?,
        committed: 0,
        discarded_wrong_guess: 0,
        rejected_total: agent_kb.rejected_count(),
        episodes: 0,
        wins: 0,
    }];
    let mut world = SimulatorWorld::new(truth, rng::derive_seed(config.seed, 1));
    let mut rng = rng::seeded(rng::derive_seed(config.seed, 2));
    let mut buffer = KaBuffer::new(config.buffer_size);
    for cycle in 1..=config.cycles {
        let gmf_config = GmfConfig {
            seed: rng::derive_seed(config.seed, 1000 + cycle as u64),
            ..config.gmf.clone()
        };
        let model = if config.t2 == 0 || config.selector == KaSelector::UncertaintyOnly {
            None
        } else {
            Some(gmf_train(&agent_kb.indicator_matrix(), &gmf_config)?.0)
        };
        let (mut episodes, mut wins) = (0, 0);
        // With t2 = 0 nothing is ever buffered; play one buffer's worth of
        // IS-only episodes so the cycle still has a defined length. The cap
        // also ends a cycle whose entity has nothing left to ask.
        let episode_budget = if config.t2 == 0 {
            config.buffer_size.max(1)
        } else {
            config.buffer_size.saturating_mul(10)
        };
        let placeholder = GmfModel::zeros(1, 1, 1);
        while !buffer.is_full() && episodes < episode_budget {
            let target = world.sample_target();
            let mut history = EpisodeHistory::new(agent_kb.num_questions());
            for _ in 0..config.t1 {
                let q = policy.select(&history, 0.0, &mut rng)?;
                let x = world.respond(target, q);
                history.push(q, x)?;
            }
            let guess = policy.guess(&history, agent_kb)?;
            let correct = judge(target, guess);
            let remaining = config.buffer_size - buffer.len();
            let t2 = config.t2.min(remaining);
            let asked = ka_phase(
                config.selector,
                model.as_ref().unwrap_or(&placeholder),
                agent_kb,
                guess,
                &mut history,
                t2,
                config.n_c,
                &mut world,
                target,
                &mut rng,
            )?;
            for (q, x) in asked {
                buffer.push(KaRecord {
                    entity: guess,
                    question: q,
                    response: x,
                    correct,
                })?;
            }
            episodes += 1;
            wins += correct as usize;
        }
        let summary = commit_buffer(&mut buffer, agent_kb, config.commit_all, &config.reject)?;
        rows.push(CycleRow {
            cycle,
            kb_size: agent_kb.known_count(),
            kb_distance: kb_distance(agent_kb, truth)?,
            committed: summary.committed,
            discarded_wrong_guess: summary.discarded_wrong_guess,
            rejected_total: agent_kb.rejected_count(),
            episodes,
            wins,
        });
    }
    Ok(rows)
}
