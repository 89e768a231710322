//! Experiment configuration: a TOML file of `key = value` sections plus
//! `section.key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twentyq_core::agents::{DrqnSizes, EpsilonSchedule, QLearningConfig};
use twentyq_core::ka::{GmfConfig, KaRunConfig, KaSelector, RejectRule};
use twentyq_core::kb::SyntheticSpec;

use crate::agent::{AgentKind, AgentShape};
use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Run seed for training, KA and the service. Every other stream is
    /// derived from it or set explicitly below.
    pub seed: u64,
    pub kb: KbConfig,
    pub game: GameConfig,
    pub agent: AgentConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ka: KaConfig,
    pub sweep: SweepConfig,
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KbConfig {
    /// Load this KB file instead of generating one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub entities: usize,
    pub questions: usize,
    pub density: f64,
    pub zipf_exponent: f64,
    pub concentration: f64,
    pub clusters: usize,
    pub affinity: f64,
    pub records: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    /// Questions per game, IS and KA together.
    pub total: usize,
    /// IS questions for `train-is`, `eval-is` and the T1 sweep.
    pub t1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Hidden widths of la-dqn.
    pub hidden: Vec<usize>,
    pub question_dim: usize,
    pub response_dim: usize,
    pub lstm_hidden: usize,
    /// Policy to load for `eval-is`, `run-ka` and `serve`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub priority_alpha: f64,
    pub target_update_episodes: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_steps: usize,
    pub updates_per_episode: usize,
    pub learn_start: usize,
    pub curve_window: usize,
    pub curve_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KaConfig {
    pub holdout: f64,
    /// IS questions before KA starts; the rest of `game.total` goes to KA.
    pub t1: usize,
    pub n_c: usize,
    pub buffer_size: usize,
    pub cycles: usize,
    pub selector: String,
    pub latent_dim: usize,
    pub gmf_lr: f64,
    pub negatives: usize,
    pub gmf_epochs: usize,
    pub gmf_batch_size: usize,
    pub reject_min_total: u32,
    pub reject_unknown_fraction: f64,
    pub commit_all: bool,
    /// After the cycles, continue IS training this many episodes on the
    /// updated KB and on the untouched holdout KB, and evaluate both.
    pub continue_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub t1_values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub max_sessions: usize,
    pub session_timeout_secs: u64,
    /// Where committed KB updates are written; unset keeps them in memory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kb_out: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            kb: KbConfig::default(),
            game: GameConfig::default(),
            agent: AgentConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            ka: KaConfig::default(),
            sweep: SweepConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl Default for KbConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        KbConfig {
            path: None,
            entities: s.entities,
            questions: s.questions,
            density: s.density,
            zipf_exponent: s.zipf_exponent,
            concentration: s.concentration,
            clusters: s.clusters,
            affinity: s.affinity,
            records: s.records,
            seed: s.seed,
        }
    }
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig { total: 20, t1: 20 }
    }
}

impl Default for AgentConfig {
    fn default() -> Self {
        let d = DrqnSizes::default();
        AgentConfig {
            kind: AgentKind::LaDrqn,
            hidden: vec![256, 128],
            question_dim: d.question_dim,
            response_dim: d.response_dim,
            lstm_hidden: d.hidden,
            checkpoint: None,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 10_000,
            gamma: 0.99,
            lr: 1e-3,
            batch_size: 32,
            replay_capacity: 100_000,
            priority_alpha: 0.5,
            target_update_episodes: 500,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_anneal_steps: 100_000,
            updates_per_episode: 1,
            learn_start: 32,
            curve_window: 500,
            curve_every: 100,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 10_000,
            seed: 77,
        }
    }
}

impl Default for KaConfig {
    fn default() -> Self {
        let k = KaRunConfig::default();
        KaConfig {
            holdout: 0.2,
            t1: k.t1,
            n_c: k.n_c,
            buffer_size: k.buffer_size,
            cycles: k.cycles,
            selector: k.selector.name().to_string(),
            latent_dim: k.gmf.latent_dim,
            gmf_lr: k.gmf.lr,
            negatives: k.gmf.negatives,
            gmf_epochs: k.gmf.epochs,
            gmf_batch_size: k.gmf.batch_size,
            reject_min_total: k.reject.min_total,
            reject_unknown_fraction: k.reject.unknown_fraction,
            commit_all: false,
            continue_episodes: 0,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            t1_values: vec![5, 10, 15, 20],
        }
    }
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            max_sessions: 256,
            session_timeout_secs: 600,
            kb_out: None,
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl Config {
    /// Read an optional file, apply `section.key=value` overrides in order,
    /// then validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(io_err(p))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.game;
        if g.t1 == 0 || g.t1 > g.total {
            return bad(format!("game.t1 must be in 1..={}, got {}", g.total, g.t1));
        }
        if self.kb.path.is_none() && g.total > self.kb.questions {
            return bad(format!("game.total {} exceeds {} questions", g.total, self.kb.questions));
        }
        if self.ka.t1 == 0 || self.ka.t1 > g.total {
            return bad(format!("ka.t1 must be in 1..={}, got {}", g.total, self.ka.t1));
        }
        if !(0.0..1.0).contains(&self.ka.holdout) {
            return bad("ka.holdout must be in [0, 1)");
        }
        self.selector()?;
        if self.sweep.t1_values.iter().any(|&t| t == 0 || t > self.kb.questions) {
            return bad("sweep.t1_values must lie in 1..=kb.questions");
        }
        if self.eval.episodes == 0 {
            return bad("eval.episodes must be positive");
        }
        if self.service.max_sessions == 0 {
            return bad("service.max_sessions must be positive");
        }
        self.q_learning(g.t1).validate()?;
        self.synthetic_spec().validate()?;
        Ok(())
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        let k = &self.kb;
        SyntheticSpec {
            entities: k.entities,
            questions: k.questions,
            density: k.density,
            zipf_exponent: k.zipf_exponent,
            concentration: k.concentration,
            clusters: k.clusters,
            affinity: k.affinity,
            records: k.records,
            seed: k.seed,
            ..SyntheticSpec::default()
        }
    }

    pub fn agent_shape(&self, questions: usize) -> AgentShape {
        AgentShape {
            kind: self.agent.kind,
            questions,
            dqn_hidden: self.agent.hidden.clone(),
            drqn: DrqnSizes {
                question_dim: self.agent.question_dim,
                response_dim: self.agent.response_dim,
                hidden: self.agent.lstm_hidden,
            },
        }
    }

    pub fn q_learning(&self, t1: usize) -> QLearningConfig {
        let t = &self.train;
        QLearningConfig {
            t1,
            gamma: t.gamma,
            lr: t.lr,
            batch_size: t.batch_size,
            replay_capacity: t.replay_capacity,
            priority_alpha: t.priority_alpha,
            target_update_episodes: t.target_update_episodes,
            epsilon: EpsilonSchedule {
                start: t.epsilon_start,
                end: t.epsilon_end,
                anneal_steps: t.epsilon_anneal_steps,
            },
            updates_per_episode: t.updates_per_episode,
            learn_start: t.learn_start,
            curve_window: t.curve_window,
            curve_every: t.curve_every,
            seed: self.seed,
        }
    }

    pub fn selector(&self) -> Result<KaSelector> {
        KaSelector::from_name(&self.ka.selector).ok_or_else(|| {
            Error::Config(format!(
                "ka.selector must be la-gmf, uncertainty-only or value-only, got `{}`",
                self.ka.selector
            ))
        })
    }

    pub fn gmf(&self) -> GmfConfig {
        GmfConfig {
            latent_dim: self.ka.latent_dim,
            lr: self.ka.gmf_lr,
            negatives: self.ka.negatives,
            epochs: self.ka.gmf_epochs,
            batch_size: self.ka.gmf_batch_size,
            seed: 0,
        }
    }

    pub fn ka_run(&self, selector: KaSelector) -> KaRunConfig {
        KaRunConfig {
            t1: self.ka.t1,
            t2: self.game.total - self.ka.t1,
            n_c: self.ka.n_c,
            buffer_size: self.ka.buffer_size,
            cycles: self.ka.cycles,
            selector,
            gmf: self.gmf(),
            reject: RejectRule {
                min_total: self.ka.reject_min_total,
                unknown_fraction: self.ka.reject_unknown_fraction,
            },
            commit_all: self.ka.commit_all,
            seed: self.seed,
        }
    }
}

/// Parse the right-hand side as a TOML value, falling back to a bare string
/// so `agent.kind=la-lin` works without quotes.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Set `section.key=value` (or a top-level `key=value`) in `table`.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let Some((path, raw)) = spec.split_once('=') else {
        return bad(format!("override `{spec}` is not key=value"));
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return bad(format!("override `{spec}` has an empty key"));
    }
    let (last, parents) = keys.split_last().expect("split yields a key");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return bad(format!("override `{spec}`: `{k}` is not a section")),
        };
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}
