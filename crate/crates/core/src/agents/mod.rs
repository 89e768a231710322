//! Information-seeking agents.
//!
//! An episode asks exactly `t1` distinct questions, then guesses. The Q-learning
//! agents score every question in one forward pass and pick greedily (or
//! uniformly at random with probability epsilon) among questions not yet
//! asked; the final guess comes from the naive-Bayes [`guesser`](crate::guesser).
//! The entropy baseline prunes candidates with a tolerance counter instead.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::guesser;
use crate::kb::{KnowledgeBase, Response};
use crate::rng::SimRng;
use crate::sim::{judge, SimulatorWorld};

mod entropy;
mod qnet;
mod replay;
mod train;

pub use entropy::{EntropyAgent, EntropyState, ENTROPY_BINS, TOLERANCE_THRESHOLD};
pub use qnet::{encode_observation_drqn, DqnNet, DrqnNet, DrqnSizes, QNetwork};
pub use replay::PrioritizedReplay;
pub use train::{minibatch_loss, train, CurvePoint, QLearner, QLearningConfig, TrainOutcome};

/// Questions and responses of the current episode, without repeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeHistory {
    steps: Vec<(usize, Response)>,
    asked: Vec<bool>,
}

impl EpisodeHistory {
    pub fn new(num_questions: usize) -> Self {
        EpisodeHistory {
            steps: Vec::new(),
            asked: vec![false; num_questions],
        }
    }

    pub fn from_steps(num_questions: usize, steps: &[(usize, Response)]) -> Result<Self> {
        let mut h = EpisodeHistory::new(num_questions);
        for &(q, r) in steps {
            h.push(q, r)?;
        }
        Ok(h)
    }

    pub fn push(&mut self, question: usize, response: Response) -> Result<()> {
        match self.asked.get_mut(question) {
            None => Err(Error::OutOfRange {
                what: "question",
                index: question,
                len: self.asked.len(),
            }),
            Some(true) => Err(Error::DuplicateQuestion(question)),
            Some(slot) => {
                *slot = true;
                self.steps.push((question, response));
                Ok(())
            }
        }
    }

    pub fn is_asked(&self, question: usize) -> bool {
        self.asked.get(question).copied().unwrap_or(false)
    }

    pub fn steps(&self) -> &[(usize, Response)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn asked_mask(&self) -> &[bool] {
        &self.asked
    }

    pub fn num_questions(&self) -> usize {
        self.asked.len()
    }
}

/// Asked-mask after the first `len` steps of an episode.
pub fn asked_after(num_questions: usize, steps: &[(usize, Response)], len: usize) -> Vec<bool> {
    let mut mask = vec![false; num_questions];
    for &(q, _) in &steps[..len] {
        mask[q] = true;
    }
    mask
}

/// Fully observable state: per question `[asked, yes, no, unknown]`.
pub fn encode_state_dqn(steps: &[(usize, Response)], num_questions: usize) -> Vec<f64> {
    let mut s = vec![0.0; 4 * num_questions];
    for &(q, r) in steps {
        s[4 * q] = 1.0;
        s[4 * q + 1 + r.code()] = 1.0;
    }
    s
}

/// Linear epsilon anneal from `start` to `end` over `anneal_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: usize,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsilonSchedule {
            start: eps,
            end: eps,
            anneal_steps: 0,
        }
    }

    pub fn epsilon_at(&self, step: usize) -> f64 {
        if self.anneal_steps == 0 || step >= self.anneal_steps {
            return self.end;
        }
        let frac = step as f64 / self.anneal_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

impl Default for EpsilonSchedule {
    /// 1.0 down to 0.1 over one million steps.
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.1,
            anneal_steps: 1_000_000,
        }
    }
}

/// Epsilon-greedy over unasked questions; greedy ties go to the lowest index.
pub fn select_action(qvals: &[f64], asked: &[bool], epsilon: f64, rng: &mut SimRng) -> Result<usize> {
    let free = asked.iter().filter(|&&a| !a).count();
    if free == 0 || qvals.len() != asked.len() {
        return if free == 0 {
            Err(Error::NoQuestionsLeft)
        } else {
            Err(Error::Shape(alloc::format!(
                "{} q-values for {} questions",
                qvals.len(),
                asked.len()
            )))
        };
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let pick = rng.gen_range(0..free);
        return Ok(asked
            .iter()
            .enumerate()
            .filter(|(_, &a)| !a)
            .nth(pick)
            .map(|(i, _)| i)
            .expect("pick < free"));
    }
    Ok(masked_argmax(qvals, asked).expect("free > 0"))
}

/// Lowest-index argmax among entries where `asked` is false.
pub fn masked_argmax(qvals: &[f64], asked: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&q, &a)) in qvals.iter().zip(asked).enumerate() {
        if a {
            continue;
        }
        match best {
            Some((_, b)) if q <= b => {}
            _ => best = Some((i, q)),
        }
    }
    best.map(|(i, _)| i)
}

/// One step of experience. The whole episode is shared so recurrent
/// networks can recompute their state from the prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub episode: Arc<[(usize, Response)]>,
    pub episode_id: u64,
    pub step: usize,
    pub reward: f64,
    pub terminal: bool,
}

impl Transition {
    pub fn action(&self) -> usize {
        self.episode[self.step].0
    }

    /// History before the action.
    pub fn state(&self) -> &[(usize, Response)] {
        &self.episode[..self.step]
    }

    /// History after the action and its response.
    pub fn next_state(&self) -> &[(usize, Response)] {
        &self.episode[..self.step + 1]
    }
}

/// Double Q-learning target value of a next state: the behave network picks
/// the action, the target network scores it.
pub fn double_q_value(behave_next: &[f64], target_next: &[f64], asked_next: &[bool]) -> f64 {
    match masked_argmax(behave_next, asked_next) {
        Some(a) => target_next[a],
        None => 0.0,
    }
}

/// Plain DQN target value: max of the target network over free questions.
pub fn max_q_value(target_next: &[f64], asked_next: &[bool]) -> f64 {
    match masked_argmax(target_next, asked_next) {
        Some(a) => target_next[a],
        None => 0.0,
    }
}

/// TD target for one transition.
pub fn td_target<N: QNetwork>(t: &Transition, behave: &N, target: &N, gamma: f64) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    let next = t.next_state();
    let asked = asked_after(behave.num_questions(), &t.episode, next.len());
    let b = behave.q_values(next)?;
    let q = target.q_values(next)?;
    Ok(t.reward + gamma * double_q_value(&b, &q, &asked))
}

/// A questioning strategy for the information-seeking phase.
pub trait IsPolicy {
    fn num_questions(&self) -> usize;

    /// Next question given the history so far.
    fn select(&self, history: &EpisodeHistory, epsilon: f64, rng: &mut SimRng) -> Result<usize>;

    /// Final guess; naive Bayes over `kb` unless the policy has its own rule.
    fn guess(&self, history: &EpisodeHistory, kb: &KnowledgeBase) -> Result<usize> {
        Ok(guesser::posterior(history.steps(), kb)?.guess)
    }
}

impl<P: IsPolicy + ?Sized> IsPolicy for &P {
    fn num_questions(&self) -> usize {
        (**self).num_questions()
    }

    fn select(&self, history: &EpisodeHistory, epsilon: f64, rng: &mut SimRng) -> Result<usize> {
        (**self).select(history, epsilon, rng)
    }

    fn guess(&self, history: &EpisodeHistory, kb: &KnowledgeBase) -> Result<usize> {
        (**self).guess(history, kb)
    }
}

/// Picks uniformly among unasked questions; the chance-level reference.
#[derive(Debug, Clone, Copy)]
pub struct RandomPolicy {
    pub questions: usize,
}

impl IsPolicy for RandomPolicy {
    fn num_questions(&self) -> usize {
        self.questions
    }

    fn select(&self, history: &EpisodeHistory, _epsilon: f64, rng: &mut SimRng) -> Result<usize> {
        select_action(&vec![0.0; self.questions], history.asked_mask(), 1.0, rng)
    }
}

/// Outcome of one information-seeking episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub target: usize,
    pub history: EpisodeHistory,
    pub guess: usize,
    pub win: bool,
}

impl Episode {
    /// Zero reward until the last question, then +1 for a win and -1 otherwise.
    pub fn transitions(&self, episode_id: u64) -> Vec<Transition> {
        let steps: Arc<[(usize, Response)]> = Arc::from(self.history.steps());
        let last = steps.len().saturating_sub(1);
        let terminal_reward = if self.win { 1.0 } else { -1.0 };
        (0..steps.len())
            .map(|t| Transition {
                episode: Arc::clone(&steps),
                episode_id,
                step: t,
                reward: if t == last { terminal_reward } else { 0.0 },
                terminal: t == last,
            })
            .collect()
    }
}

/// Play one episode of `t1` questions against the simulator.
///
/// `epsilon_at` gives the exploration rate for each step index within the
/// episode; evaluation passes `|_| 0.0`.
pub fn run_is_episode<P: IsPolicy + ?Sized>(
    policy: &P,
    world: &mut SimulatorWorld<'_>,
    agent_kb: &KnowledgeBase,
    t1: usize,
    mut epsilon_at: impl FnMut(usize) -> f64,
    rng: &mut SimRng,
) -> Result<Episode> {
    let n = policy.num_questions();
    if t1 > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "cannot ask {t1} distinct questions out of {n}"
        )));
    }
    let target = world.sample_target();
    let mut history = EpisodeHistory::new(n);
    for t in 0..t1 {
        let q = policy.select(&history, epsilon_at(t), rng)?;
        let x = world.respond(target, q);
        history.push(q, x)?;
    }
    let guess = policy.guess(&history, agent_kb)?;
    Ok(Episode {
        target,
        win: judge(target, guess),
        history,
        guess,
    })
}

/// Discounted return of a reward sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |acc, &r| r + gamma * acc)
}

/// Fraction of greedy episodes won; each episode seeds its own simulator
/// stream from `(seed, index)` so results do not depend on scheduling.
pub fn eval_winning_rate<P: IsPolicy + ?Sized>(
    policy: &P,
    truth: &KnowledgeBase,
    agent_kb: &KnowledgeBase,
    t1: usize,
    episodes: usize,
    seed: u64,
) -> Result<(f64, Vec<Episode>)> {
    let mut world = SimulatorWorld::new(truth, seed);
    let mut played = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let s = crate::rng::derive_seed(seed, i as u64);
        world.reseed(s);
        let mut rng = crate::rng::seeded(crate::rng::derive_seed(s, 1));
        played.push(run_is_episode(policy, &mut world, agent_kb, t1, |_| 0.0, &mut rng)?);
    }
    let wins = played.iter().filter(|e| e.win).count();
    let rate = if episodes == 0 {
        0.0
    } else {
        wins as f64 / episodes as f64
    };
    Ok((rate, played))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Entity, Question};
    use crate::rng::seeded;
    use alloc::format;

    fn kb(m: usize, n: usize) -> KnowledgeBase {
        KnowledgeBase::new(
            (0..m)
                .map(|i| Entity {
                    id: format!("e{i}"),
                    name: format!("E{i}"),
                    popularity: (m - i) as f64,
                })
                .collect(),
            (0..n)
                .map(|i| Question {
                    id: format!("q{i}"),
                    text: format!("Q{i}"),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dqn_state_layout() {
        assert_eq!(encode_state_dqn(&[], 3), vec![0.0; 12]);
        assert_eq!(
            encode_state_dqn(&[(1, Response::Yes)], 3),
            vec![0., 0., 0., 0., 1., 1., 0., 0., 0., 0., 0., 0.]
        );
        assert_eq!(
            encode_state_dqn(&[(0, Response::No), (2, Response::Unknown)], 3),
            vec![1., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1.]
        );
    }

    #[test]
    fn history_rejects_repeats() {
        let mut h = EpisodeHistory::new(3);
        h.push(1, Response::Yes).unwrap();
        assert_eq!(h.push(1, Response::No), Err(Error::DuplicateQuestion(1)));
        assert!(h.push(3, Response::No).is_err());
        assert!(h.is_asked(1) && !h.is_asked(0));
    }

    #[test]
    fn epsilon_schedule_examples() {
        let s = EpsilonSchedule {
            start: 1.0,
            end: 0.1,
            anneal_steps: 1000,
        };
        assert_eq!(s.epsilon_at(0), 1.0);
        assert_eq!(s.epsilon_at(1000), 0.1);
        assert_eq!(s.epsilon_at(5000), 0.1);
        assert!((s.epsilon_at(500) - 0.55).abs() < 1e-12);
        let d = EpsilonSchedule::default();
        assert_eq!(d.epsilon_at(0), 1.0);
        assert_eq!(d.epsilon_at(1_000_000), 0.1);
    }

    #[test]
    fn greedy_selection_respects_mask_and_ties() {
        let mut rng = seeded(0);
        assert_eq!(select_action(&[0.2, 0.9, 0.5], &[false, true, false], 0.0, &mut rng), Ok(2));
        assert_eq!(select_action(&[0.5, 0.5], &[false, false], 0.0, &mut rng), Ok(0));
        assert_eq!(select_action(&[0.5, 0.5], &[true, true], 0.0, &mut rng), Err(Error::NoQuestionsLeft));
    }

    #[test]
    fn full_exploration_is_uniform_over_free() {
        let mut rng = seeded(1);
        let mut counts = [0usize; 5];
        let asked = [false, false, true, false, false];
        for _ in 0..10_000 {
            counts[select_action(&[0.0, 1.0, 5.0, 0.0, 0.0], &asked, 1.0, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[2], 0);
        for i in [0, 1, 3, 4] {
            assert!((counts[i] as f64 / 10_000.0 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn greedy_choice_invariant_under_positive_affine_maps() {
        let mut rng = seeded(2);
        for _ in 0..50 {
            let q: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let asked: Vec<bool> = (0..6).map(|_| rng.gen_bool(0.3)).collect();
            if asked.iter().all(|&a| a) {
                continue;
            }
            let scaled: Vec<f64> = q.iter().map(|v| 3.5 * v + 0.7).collect();
            assert_eq!(masked_argmax(&q, &asked), masked_argmax(&scaled, &asked));
        }
    }

    #[test]
    fn double_q_differs_from_max_when_nets_disagree() {
        let behave = [0.9, 0.1];
        let target = [0.2, 0.8];
        let asked = [false, false];
        assert_eq!(double_q_value(&behave, &target, &asked), 0.2);
        assert_eq!(max_q_value(&target, &asked), 0.8);
    }

    #[test]
    fn transitions_carry_terminal_reward_only() {
        let mut h = EpisodeHistory::new(4);
        h.push(0, Response::Yes).unwrap();
        h.push(3, Response::No).unwrap();
        h.push(1, Response::Unknown).unwrap();
        let ep = Episode {
            target: 0,
            history: h,
            guess: 1,
            win: false,
        };
        let ts = ep.transitions(7);
        assert_eq!(ts.len(), 3);
        assert_eq!(ts.iter().map(|t| t.reward).collect::<Vec<_>>(), vec![0.0, 0.0, -1.0]);
        assert!(ts[2].terminal && !ts[0].terminal);
        assert_eq!(ts[1].action(), 3);
        assert_eq!(ts[1].state(), &[(0, Response::Yes)]);
    }

    #[test]
    fn discounted_return_stays_in_unit_interval() {
        let r = [0.0, 0.0, 0.0, 1.0];
        let g = discounted_return(&r, 0.99);
        assert!((g - 0.99f64.powi(3)).abs() < 1e-12);
        assert!(discounted_return(&[0.0, -1.0], 1.0) >= -1.0);
    }

    #[test]
    fn zero_questions_guesses_from_prior() {
        let k = kb(3, 2);
        let mut world = SimulatorWorld::new(&k, 4);
        let p = RandomPolicy { questions: 2 };
        let ep = run_is_episode(&p, &mut world, &k, 0, |_| 0.0, &mut seeded(0)).unwrap();
        assert!(ep.history.is_empty());
        assert_eq!(ep.guess, 0);
        assert_eq!(ep.win, ep.target == 0);
    }

    #[test]
    fn single_entity_always_wins() {
        let k = kb(1, 4);
        let (rate, _) = eval_winning_rate(&RandomPolicy { questions: 4 }, &k, &k, 3, 50, 9).unwrap();
        assert_eq!(rate, 1.0);
    }

    #[test]
    fn too_many_questions_is_an_error() {
        let k = kb(2, 2);
        let mut world = SimulatorWorld::new(&k, 0);
        let p = RandomPolicy { questions: 2 };
        assert!(run_is_episode(&p, &mut world, &k, 3, |_| 0.0, &mut seeded(0)).is_err());
    }

    #[test]
    fn episodes_never_repeat_questions() {
        let k = kb(4, 10);
        let (_, eps) = eval_winning_rate(&RandomPolicy { questions: 10 }, &k, &k, 10, 30, 2).unwrap();
        for e in eps {
            let mut seen = [false; 10];
            for &(q, _) in e.history.steps() {
                assert!(!seen[q]);
                seen[q] = true;
            }
        }
    }
}
