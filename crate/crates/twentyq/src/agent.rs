//! Agent kinds, dispatch over them, and the checkpoint file format.
//!
//! ```text
//! #la-ckpt v1
//! meta    <key> <value>
//! tensor  <name> <d0,d1,...> <v0 v1 ...>
//! ```
//!
//! Values use shortest round-trip formatting, so a reload is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use twentyq_core::agents::{DqnNet, DrqnNet, DrqnSizes, EntropyAgent, EpisodeHistory, IsPolicy};
use twentyq_core::nn::Parameters;
use twentyq_core::rng::SimRng;
use twentyq_core::KnowledgeBase;

use crate::error::{io_err, parse_err, Error, Result};

pub const CKPT_HEADER: &str = "#la-ckpt v1";
/// Bumped whenever the state or observation encoding changes.
pub const ENCODER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    LaDqn,
    LaDrqn,
    LaLin,
    Entropy,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::LaDqn => "la-dqn",
            AgentKind::LaDrqn => "la-drqn",
            AgentKind::LaLin => "la-lin",
            AgentKind::Entropy => "entropy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "la-dqn" => Some(AgentKind::LaDqn),
            "la-drqn" => Some(AgentKind::LaDrqn),
            "la-lin" => Some(AgentKind::LaLin),
            "entropy" => Some(AgentKind::Entropy),
            _ => None,
        }
    }
}

/// Network shapes needed to rebuild an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentShape {
    pub kind: AgentKind,
    pub questions: usize,
    pub dqn_hidden: Vec<usize>,
    pub drqn: DrqnSizes,
}

/// Any information-seeking agent.
#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Dqn { kind: AgentKind, net: DqnNet },
    Drqn(DrqnNet),
    Entropy(EntropyAgent),
}

impl Agent {
    /// Fresh agent. The entropy agent reads its expectations from `kb`.
    pub fn new(shape: &AgentShape, kb: &KnowledgeBase, rng: &mut SimRng) -> Agent {
        match shape.kind {
            AgentKind::LaDqn => Agent::Dqn {
                kind: AgentKind::LaDqn,
                net: DqnNet::new(shape.questions, &shape.dqn_hidden, rng),
            },
            AgentKind::LaLin => Agent::Dqn {
                kind: AgentKind::LaLin,
                net: DqnNet::linear(shape.questions, rng),
            },
            AgentKind::LaDrqn => Agent::Drqn(DrqnNet::new(shape.questions, shape.drqn, rng)),
            AgentKind::Entropy => Agent::Entropy(EntropyAgent::new(kb)),
        }
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Dqn { kind, .. } => *kind,
            Agent::Drqn(_) => AgentKind::LaDrqn,
            Agent::Entropy(_) => AgentKind::Entropy,
        }
    }

    pub fn shape(&self) -> AgentShape {
        let questions = self.num_questions();
        match self {
            Agent::Dqn { kind, net } => AgentShape {
                kind: *kind,
                questions,
                dqn_hidden: net.hidden_sizes(),
                drqn: DrqnSizes::default(),
            },
            Agent::Drqn(net) => AgentShape {
                kind: AgentKind::LaDrqn,
                questions,
                dqn_hidden: Vec::new(),
                drqn: net.sizes(),
            },
            Agent::Entropy(_) => AgentShape {
                kind: AgentKind::Entropy,
                questions,
                dqn_hidden: Vec::new(),
                drqn: DrqnSizes::default(),
            },
        }
    }

    fn params(&self) -> Option<&dyn ParamView> {
        match self {
            Agent::Dqn { net, .. } => Some(net),
            Agent::Drqn(net) => Some(net),
            Agent::Entropy(_) => None,
        }
    }
}

/// Object-safe slice of [`Parameters`] for serialization.
trait ParamView {
    fn named(&self) -> Vec<(String, Vec<usize>, Vec<f64>)>;
}

impl<P: Parameters> ParamView for P {
    fn named(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        self.tensor_names()
            .into_iter()
            .zip(self.tensors())
            .map(|(n, t)| (n, t.shape().to_vec(), t.data().to_vec()))
            .collect()
    }
}

impl IsPolicy for Agent {
    fn num_questions(&self) -> usize {
        match self {
            Agent::Dqn { net, .. } => net.num_questions(),
            Agent::Drqn(net) => net.num_questions(),
            Agent::Entropy(a) => a.num_questions(),
        }
    }

    fn select(&self, history: &EpisodeHistory, epsilon: f64, rng: &mut SimRng) -> twentyq_core::Result<usize> {
        match self {
            Agent::Dqn { net, .. } => net.select(history, epsilon, rng),
            Agent::Drqn(net) => net.select(history, epsilon, rng),
            Agent::Entropy(a) => a.select(history, epsilon, rng),
        }
    }

    fn guess(&self, history: &EpisodeHistory, kb: &KnowledgeBase) -> twentyq_core::Result<usize> {
        match self {
            Agent::Dqn { net, .. } => net.guess(history, kb),
            Agent::Drqn(net) => net.guess(history, kb),
            Agent::Entropy(a) => a.guess(history, kb),
        }
    }
}

/// Serialize an agent with its metadata. `extra` lands in `meta` lines.
pub fn checkpoint_to_string(agent: &Agent, t1: usize, extra: &[(&str, String)]) -> String {
    let shape = agent.shape();
    let mut out = String::new();
    out.push_str(CKPT_HEADER);
    out.push('\n');
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mut meta: Vec<(&str, String)> = vec![
        ("agent", shape.kind.name().to_string()),
        ("questions", shape.questions.to_string()),
        ("t1", t1.to_string()),
        ("encoder", ENCODER_VERSION.to_string()),
    ];
    match shape.kind {
        AgentKind::LaDqn | AgentKind::LaLin => meta.push(("hidden", join(&shape.dqn_hidden))),
        AgentKind::LaDrqn => meta.push((
            "drqn_sizes",
            join(&[shape.drqn.question_dim, shape.drqn.response_dim, shape.drqn.hidden]),
        )),
        AgentKind::Entropy => {}
    }
    meta.extend(extra.iter().cloned());
    for (k, v) in meta {
        writeln!(out, "meta\t{k}\t{v}").unwrap();
    }
    if let Some(p) = agent.params() {
        for (name, shape, data) in p.named() {
            let values = data.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
            writeln!(out, "tensor\t{name}\t{}\t{values}", join(&shape)).unwrap();
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub agent: Agent,
    pub t1: usize,
    pub meta: BTreeMap<String, String>,
}

fn parse_list(s: &str, line: usize, field: &'static str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.parse().map_err(|_| parse_err(line, field, format!("bad integer `{x}`"))))
        .collect()
}

/// Parse a checkpoint. The entropy agent has no weights and is rebuilt from
/// `kb`, which must have the checkpoint's question count.
pub fn parse_checkpoint(text: &str, kb: &KnowledgeBase) -> Result<Checkpoint> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h.trim_end() == CKPT_HEADER => {}
        _ => return Err(parse_err(1, "header", format!("expected `{CKPT_HEADER}`"))),
    }
    let mut meta = BTreeMap::new();
    let mut tensors: Vec<(usize, String, Vec<usize>, Vec<f64>)> = Vec::new();
    for (ln, raw) in lines {
        if raw.is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.splitn(4, '\t').collect();
        match f[0] {
            "meta" if f.len() >= 3 => {
                meta.insert(f[1].to_string(), f[2..].join("\t"));
            }
            "tensor" if f.len() == 4 => {
                let shape = parse_list(f[2], ln, "shape")?;
                let data = if f[3].is_empty() {
                    Vec::new()
                } else {
                    f[3].split(' ')
                        .map(|x| x.parse::<f64>().map_err(|_| parse_err(ln, "values", format!("bad number `{x}`"))))
                        .collect::<Result<Vec<_>>>()?
                };
                tensors.push((ln, f[1].to_string(), shape, data));
            }
            _ => return Err(parse_err(ln, "kind", "expected a meta or tensor line")),
        }
    }
    let get = |k: &'static str| meta.get(k).ok_or_else(|| parse_err(0, k, "missing meta entry"));
    let kind = AgentKind::from_name(get("agent")?).ok_or_else(|| parse_err(0, "agent", "unknown agent kind"))?;
    let questions: usize = get("questions")?.parse().map_err(|_| parse_err(0, "questions", "not an integer"))?;
    let t1: usize = get("t1")?.parse().map_err(|_| parse_err(0, "t1", "not an integer"))?;
    let encoder: u32 = get("encoder")?.parse().map_err(|_| parse_err(0, "encoder", "not an integer"))?;
    if encoder != ENCODER_VERSION {
        return Err(parse_err(0, "encoder", format!("version {encoder}, expected {ENCODER_VERSION}")));
    }
    if questions != kb.num_questions() {
        return Err(Error::Config(format!(
            "checkpoint has {questions} questions but the KB has {}",
            kb.num_questions()
        )));
    }
    let mut shape = AgentShape {
        kind,
        questions,
        dqn_hidden: Vec::new(),
        drqn: DrqnSizes::default(),
    };
    match kind {
        AgentKind::LaDqn | AgentKind::LaLin => shape.dqn_hidden = parse_list(get("hidden")?, 0, "hidden")?,
        AgentKind::LaDrqn => {
            let s = parse_list(get("drqn_sizes")?, 0, "drqn_sizes")?;
            if s.len() != 3 {
                return Err(parse_err(0, "drqn_sizes", "expected three sizes"));
            }
            shape.drqn = DrqnSizes {
                question_dim: s[0],
                response_dim: s[1],
                hidden: s[2],
            };
        }
        AgentKind::Entropy => {}
    }
    let mut rng = twentyq_core::rng::seeded(0);
    let mut agent = Agent::new(&shape, kb, &mut rng);
    let slots: Option<(Vec<String>, Vec<&mut twentyq_core::nn::Tensor>)> = match &mut agent {
        Agent::Dqn { net, .. } => Some((net.tensor_names(), net.tensors_mut())),
        Agent::Drqn(net) => Some((net.tensor_names(), net.tensors_mut())),
        Agent::Entropy(_) => None,
    };
    if let Some((names, slots)) = slots {
        if tensors.len() != slots.len() {
            return Err(parse_err(0, "tensor", format!("expected {} tensors, found {}", slots.len(), tensors.len())));
        }
        for ((name, slot), (ln, tname, tshape, data)) in names.iter().zip(slots).zip(tensors) {
            if *name != tname || slot.shape() != tshape.as_slice() || slot.len() != data.len() {
                return Err(parse_err(ln, "tensor", format!("expected `{name}` with shape {:?}", slot.shape())));
            }
            if data.iter().any(|x| !x.is_finite()) {
                return Err(parse_err(ln, "values", "non-finite value"));
            }
            slot.data_mut().copy_from_slice(&data);
        }
    }
    Ok(Checkpoint { agent, t1, meta })
}

pub fn save_checkpoint(agent: &Agent, t1: usize, extra: &[(&str, String)], path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(agent, t1, extra)).map_err(io_err(path))
}

pub fn load_checkpoint(path: &Path, kb: &KnowledgeBase) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_checkpoint(&text, kb)
}
