use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use super::{asked_after, double_q_value, run_is_episode, Episode, EpsilonSchedule, QNetwork, Transition};
use super::replay::PrioritizedReplay;
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::nn::{zeros_like, Adam};
use crate::rng::{self, SimRng};
use crate::sim::SimulatorWorld;

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningConfig {
    pub t1: usize,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub priority_alpha: f64,
    /// Copy the behave network into the target network every this many episodes.
    pub target_update_episodes: usize,
    pub epsilon: EpsilonSchedule,
    /// Minibatches after each episode.
    pub updates_per_episode: usize,
    /// Transitions stored before learning starts.
    pub learn_start: usize,
    pub curve_window: usize,
    pub curve_every: usize,
    pub seed: u64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            t1: 20,
            gamma: 0.99,
            lr: 2.5e-4,
            batch_size: 32,
            replay_capacity: 100_000,
            priority_alpha: 0.5,
            target_update_episodes: 10_000,
            epsilon: EpsilonSchedule::default(),
            updates_per_episode: 1,
            learn_start: 32,
            curve_window: 500,
            curve_every: 100,
            seed: 0,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1]");
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return bad("batch size and replay capacity must be positive");
        }
        if self.target_update_episodes == 0 || self.curve_window == 0 || self.curve_every == 0 {
            return bad("target update period and curve window must be positive");
        }
        Ok(())
    }
}

/// One row of the learning curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    /// Wins over the last `curve_window` training episodes.
    pub winning_rate: f64,
    pub epsilon: f64,
    /// Mean minibatch loss since the previous point, if any learning happened.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<N> {
    pub policy: N,
    pub curve: Vec<CurvePoint>,
    pub steps: usize,
    pub episodes: usize,
}

/// Behave and target networks, replay and optimizer state.
#[derive(Debug, Clone)]
pub struct QLearner<N: QNetwork> {
    behave: N,
    target: N,
    adam: Adam,
    replay: PrioritizedReplay<Transition>,
    rng: SimRng,
    config: QLearningConfig,
    steps: usize,
    episodes: usize,
    window: VecDeque<bool>,
    window_wins: usize,
    pending_loss: (f64, usize),
}

impl<N: QNetwork> QLearner<N> {
    pub fn new(net: N, config: QLearningConfig) -> Result<Self> {
        config.validate()?;
        Ok(QLearner {
            target: net.clone(),
            behave: net,
            adam: Adam::new(config.lr),
            replay: PrioritizedReplay::new(config.replay_capacity, config.priority_alpha)?,
            rng: rng::seeded(rng::derive_seed(config.seed, 0x5eed)),
            steps: 0,
            episodes: 0,
            window: VecDeque::new(),
            window_wins: 0,
            pending_loss: (0.0, 0),
            config,
        })
    }

    pub fn behave(&self) -> &N {
        &self.behave
    }

    pub fn target(&self) -> &N {
        &self.target
    }

    pub fn into_policy(self) -> N {
        self.behave
    }

    pub fn config(&self) -> &QLearningConfig {
        &self.config
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.epsilon_at(self.steps)
    }

    pub fn sync_target(&mut self) {
        self.target = self.behave.clone();
    }

    /// Play one exploring episode and store its transitions.
    pub fn play_episode(&mut self, world: &mut SimulatorWorld<'_>, agent_kb: &KnowledgeBase) -> Result<Episode> {
        let schedule = self.config.epsilon;
        let base = self.steps;
        let ep = run_is_episode(
            &self.behave,
            world,
            agent_kb,
            self.config.t1,
            |t| schedule.epsilon_at(base + t),
            &mut self.rng,
        )?;
        self.steps += ep.history.len();
        for t in ep.transitions(self.episodes as u64) {
            self.replay.insert(t);
        }
        Ok(ep)
    }

    /// One minibatch update. Returns the loss measured before the step, or
    /// `None` while the replay is still filling.
    pub fn learn(&mut self) -> Result<Option<f64>> {
        Ok(self.learn_inner(false)?.map(|(before, _)| before))
    }

    /// Like [`learn`](Self::learn), also reporting the loss on the same
    /// minibatch after the step.
    pub fn learn_checked(&mut self) -> Result<Option<(f64, f64)>> {
        Ok(self.learn_inner(true)?.map(|(b, a)| (b, a.unwrap_or(b))))
    }

    fn learn_inner(&mut self, check: bool) -> Result<Option<(f64, Option<f64>)>> {
        if self.replay.len() < self.config.learn_start.max(1) {
            return Ok(None);
        }
        let slots = self.replay.sample(self.config.batch_size, &mut self.rng)?;
        let batch: Vec<Transition> = slots
            .iter()
            .map(|&s| self.replay.get(s).expect("sampled slot is filled").clone())
            .collect();
        let mut grad = zeros_like(&self.behave);
        let (loss, deltas) = td_pass(
            &self.behave,
            &self.target,
            &batch,
            self.config.gamma,
            Some((&mut grad, &mut self.rng)),
        )?;
        self.adam.step(&mut self.behave, &grad)?;
        self.replay.update_priorities(&slots, &deltas);
        let after = if check {
            Some(td_pass::<N>(&self.behave, &self.target, &batch, self.config.gamma, None)?.0)
        } else {
            None
        };
        self.pending_loss.0 += loss;
        self.pending_loss.1 += 1;
        Ok(Some((loss, after)))
    }

    /// Bookkeeping after an episode: target sync and the win window.
    fn finish_episode(&mut self, win: bool) {
        self.episodes += 1;
        if self.episodes % self.config.target_update_episodes == 0 {
            self.sync_target();
        }
        self.window.push_back(win);
        self.window_wins += win as usize;
        if self.window.len() > self.config.curve_window {
            if self.window.pop_front() == Some(true) {
                self.window_wins -= 1;
            }
        }
    }

    fn curve_point(&mut self) -> CurvePoint {
        let (sum, n) = core::mem::take(&mut self.pending_loss);
        CurvePoint {
            episode: self.episodes,
            winning_rate: self.window_wins as f64 / self.window.len().max(1) as f64,
            epsilon: self.epsilon(),
            loss: if n == 0 { None } else { Some(sum / n as f64) },
        }
    }

    /// Play and learn for `episodes` episodes, returning the curve points
    /// emitted every `curve_every` episodes.
    pub fn train_episodes(
        &mut self,
        world: &mut SimulatorWorld<'_>,
        agent_kb: &KnowledgeBase,
        episodes: usize,
    ) -> Result<Vec<CurvePoint>> {
        let mut curve = Vec::new();
        for _ in 0..episodes {
            let ep = self.play_episode(world, agent_kb)?;
            for _ in 0..self.config.updates_per_episode {
                self.learn()?;
            }
            self.finish_episode(ep.win);
            if self.episodes % self.config.curve_every == 0 {
                curve.push(self.curve_point());
            }
        }
        Ok(curve)
    }
}

/// Train a fresh learner for `episodes` episodes against `truth`.
pub fn train<N: QNetwork>(
    net: N,
    truth: &KnowledgeBase,
    agent_kb: &KnowledgeBase,
    config: QLearningConfig,
    episodes: usize,
) -> Result<TrainOutcome<N>> {
    let mut world = SimulatorWorld::new(truth, rng::derive_seed(config.seed, 0x3011d));
    let mut learner = QLearner::new(net, config)?;
    let curve = learner.train_episodes(&mut world, agent_kb, episodes)?;
    Ok(TrainOutcome {
        steps: learner.steps(),
        episodes: learner.episodes(),
        policy: learner.into_policy(),
        curve,
    })
}

/// Mean squared TD error of a minibatch.
pub fn minibatch_loss<N: QNetwork>(behave: &N, target: &N, batch: &[Transition], gamma: f64) -> Result<f64> {
    Ok(td_pass(behave, target, batch, gamma, None)?.0)
}

/// TD errors for a batch, grouped so each episode is traced once per
/// network. With `grad`, also accumulates the gradient of the mean loss.
fn td_pass<N: QNetwork>(
    behave: &N,
    target: &N,
    batch: &[Transition],
    gamma: f64,
    mut grad: Option<(&mut N, &mut SimRng)>,
) -> Result<(f64, Vec<f64>)> {
    let n = behave.num_questions();
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, t) in batch.iter().enumerate() {
        groups.entry(t.episode_id).or_default().push(i);
    }
    let mut deltas = vec![0.0; batch.len()];
    let mut loss = 0.0;
    for members in groups.values() {
        let episode = &batch[members[0]].episode;
        let mut lengths: Vec<usize> = Vec::new();
        let mut next_lengths: Vec<usize> = Vec::new();
        for &i in members {
            let t = &batch[i];
            lengths.push(t.step);
            if !t.terminal {
                lengths.push(t.step + 1);
                next_lengths.push(t.step + 1);
            }
        }
        lengths.sort_unstable();
        lengths.dedup();
        next_lengths.sort_unstable();
        next_lengths.dedup();
        let rng = grad.as_mut().map(|(_, r)| &mut **r);
        let btrace = behave.trace(episode, &lengths, rng)?;
        let ttrace = target.trace(episode, &next_lengths, None)?;
        let bq = N::trace_q(&btrace);
        let tq = N::trace_q(&ttrace);
        let pos = |ls: &[usize], l: usize| ls.binary_search(&l).expect("requested length");
        let mut dq = vec![vec![0.0; n]; lengths.len()];
        for &i in members {
            let t = &batch[i];
            let y = if t.terminal {
                t.reward
            } else {
                let next = t.step + 1;
                let asked = asked_after(n, episode, next);
                t.reward + gamma * double_q_value(&bq[pos(&lengths, next)], &tq[pos(&next_lengths, next)], &asked)
            };
            let k = pos(&lengths, t.step);
            let delta = y - bq[k][t.action()];
            deltas[i] = delta;
            loss += delta * delta * scale;
            dq[k][t.action()] -= 2.0 * delta * scale;
        }
        if let Some((g, _)) = grad.as_mut() {
            behave.backward(&btrace, &dq, g)?;
        }
    }
    Ok((loss, deltas))
}
