//! Experiment drivers behind the CLI subcommands.

use twentyq_core::agents::{eval_winning_rate, train, EpsilonSchedule, QLearningConfig, QNetwork};
use twentyq_core::agents::CurvePoint;
use twentyq_core::ka::{run_ka_cycles, CycleRow, KaSelector};
use twentyq_core::kb::generate_synthetic_kb;
use twentyq_core::rng::{derive_seed, seeded};
use twentyq_core::sim::{make_holdout, HoldoutSplit};
use twentyq_core::KnowledgeBase;

use crate::agent::Agent;
use crate::config::Config;
use crate::error::Result;
use crate::kb_file::load_kb;

const NET_STREAM: u64 = 11;
const HOLDOUT_STREAM: u64 = 0x401d;

/// The configured KB file, or the synthetic KB its `[kb]` section describes.
pub fn build_kb(config: &Config) -> Result<KnowledgeBase> {
    match &config.kb.path {
        Some(p) => load_kb(p),
        None => Ok(generate_synthetic_kb(&config.synthetic_spec())?),
    }
}

/// An untrained agent of the configured kind.
pub fn new_agent(config: &Config, kb: &KnowledgeBase) -> Agent {
    let mut rng = seeded(derive_seed(config.seed, NET_STREAM));
    Agent::new(&config.agent_shape(kb.num_questions()), kb, &mut rng)
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub agent: Agent,
    pub curve: Vec<CurvePoint>,
    pub steps: usize,
    pub episodes: usize,
}

fn train_net<N: QNetwork>(
    net: N,
    truth: &KnowledgeBase,
    agent_kb: &KnowledgeBase,
    q: QLearningConfig,
    episodes: usize,
    wrap: impl FnOnce(N) -> Agent,
) -> Result<Trained> {
    let out = train(net, truth, agent_kb, q, episodes)?;
    Ok(Trained {
        agent: wrap(out.policy),
        curve: out.curve,
        steps: out.steps,
        episodes: out.episodes,
    })
}

/// Q-learning for the network agents. The entropy agent is rebuilt from
/// `agent_kb` and needs no training.
pub fn train_agent(
    agent: Agent,
    truth: &KnowledgeBase,
    agent_kb: &KnowledgeBase,
    q: QLearningConfig,
    episodes: usize,
) -> Result<Trained> {
    match agent {
        Agent::Dqn { kind, net } => train_net(net, truth, agent_kb, q, episodes, |net| Agent::Dqn { kind, net }),
        Agent::Drqn(net) => train_net(net, truth, agent_kb, q, episodes, Agent::Drqn),
        Agent::Entropy(_) => Ok(Trained {
            agent: Agent::Entropy(twentyq_core::agents::EntropyAgent::new(agent_kb)),
            curve: Vec::new(),
            steps: 0,
            episodes: 0,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeRecord {
    pub target: usize,
    pub guess: usize,
    pub win: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub winning_rate: f64,
    pub wins: usize,
    pub episodes: Vec<EpisodeRecord>,
}

/// Greedy evaluation.
pub fn evaluate(
    agent: &Agent,
    truth: &KnowledgeBase,
    agent_kb: &KnowledgeBase,
    t1: usize,
    episodes: usize,
    seed: u64,
) -> Result<EvalOutcome> {
    let (winning_rate, played) = eval_winning_rate(agent, truth, agent_kb, t1, episodes, seed)?;
    let episodes: Vec<EpisodeRecord> = played
        .iter()
        .map(|e| EpisodeRecord {
            target: e.target,
            guess: e.guess,
            win: e.win,
        })
        .collect();
    Ok(EvalOutcome {
        winning_rate,
        wins: episodes.iter().filter(|e| e.win).count(),
        episodes,
    })
}

#[derive(Debug, Clone)]
pub struct IsReport {
    pub trained: Trained,
    pub eval: EvalOutcome,
}

/// Train the configured agent with `game.t1` questions, then evaluate it.
pub fn run_is_experiment(config: &Config, kb: &KnowledgeBase) -> Result<IsReport> {
    let t1 = config.game.t1;
    let trained = train_agent(new_agent(config, kb), kb, kb, config.q_learning(t1), config.train.episodes)?;
    let eval = evaluate(&trained.agent, kb, kb, t1, config.eval.episodes, config.eval.seed)?;
    Ok(IsReport { trained, eval })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub t1: usize,
    pub winning_rate: f64,
    pub train_steps: usize,
}

/// Train and evaluate a fresh agent for every value in `sweep.t1_values`.
pub fn sweep_t1(config: &Config, kb: &KnowledgeBase) -> Result<Vec<SweepRow>> {
    config
        .sweep
        .t1_values
        .iter()
        .map(|&t1| {
            let trained = train_agent(new_agent(config, kb), kb, kb, config.q_learning(t1), config.train.episodes)?;
            let eval = evaluate(&trained.agent, kb, kb, t1, config.eval.episodes, config.eval.seed)?;
            Ok(SweepRow {
                t1,
                winning_rate: eval.winning_rate,
                train_steps: trained.steps,
            })
        })
        .collect()
}

/// Holdout split and the frozen IS policy shared by KA runs.
#[derive(Debug, Clone)]
pub struct KaSetup {
    pub split: HoldoutSplit,
    pub policy: Agent,
    pub curve: Vec<CurvePoint>,
}

/// Demote `ka.holdout` of the known entries, then train an IS policy with
/// `ka.t1` questions on the reduced KB unless `policy` is given.
pub fn prepare_ka(config: &Config, truth: &KnowledgeBase, policy: Option<Agent>) -> Result<KaSetup> {
    let split = make_holdout(truth, config.ka.holdout, derive_seed(config.seed, HOLDOUT_STREAM))?;
    let (policy, curve) = match policy {
        Some(p) => (p, Vec::new()),
        None => {
            let t = train_agent(
                new_agent(config, &split.agent_kb),
                truth,
                &split.agent_kb,
                config.q_learning(config.ka.t1),
                config.train.episodes,
            )?;
            (t.agent, t.curve)
        }
    };
    Ok(KaSetup { split, policy, curve })
}

/// Winning rates after continued IS training on two KBs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuation {
    pub with_ka: f64,
    pub without_ka: f64,
}

#[derive(Debug, Clone)]
pub struct KaReport {
    pub selector: KaSelector,
    pub rows: Vec<CycleRow>,
    pub final_kb: KnowledgeBase,
    pub continuation: Option<Continuation>,
}

/// Run the KA cycles for one selector from the shared setup.
pub fn run_ka_experiment(
    config: &Config,
    truth: &KnowledgeBase,
    setup: &KaSetup,
    selector: KaSelector,
) -> Result<KaReport> {
    let mut kb = setup.split.agent_kb.clone();
    let rows = run_ka_cycles(&setup.policy, &mut kb, truth, &config.ka_run(selector))?;
    let continuation = if config.ka.continue_episodes > 0 {
        Some(Continuation {
            with_ka: continue_is(config, truth, &setup.policy, &kb)?,
            without_ka: continue_is(config, truth, &setup.policy, &setup.split.agent_kb)?,
        })
    } else {
        None
    };
    Ok(KaReport {
        selector,
        rows,
        final_kb: kb,
        continuation,
    })
}

/// Keep training `policy` for `ka.continue_episodes` episodes against
/// `agent_kb` with exploration held at `train.epsilon_end`, then evaluate.
/// The seeds do not depend on the KB, so two calls differ only in the KB.
pub fn continue_is(config: &Config, truth: &KnowledgeBase, policy: &Agent, agent_kb: &KnowledgeBase) -> Result<f64> {
    let t1 = config.ka.t1;
    let q = QLearningConfig {
        epsilon: EpsilonSchedule::constant(config.train.epsilon_end),
        ..config.q_learning(t1)
    };
    let trained = train_agent(policy.clone(), truth, agent_kb, q, config.ka.continue_episodes)?;
    Ok(evaluate(&trained.agent, truth, agent_kb, t1, config.eval.episodes, config.eval.seed)?.winning_rate)
}
