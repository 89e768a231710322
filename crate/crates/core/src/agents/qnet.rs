use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{encode_state_dqn, select_action, EpisodeHistory, IsPolicy};
use crate::error::{Error, Result};
use crate::kb::Response;
use crate::nn::{Activation, DenseLayer, EmbeddingTable, LstmCell, LstmStep, Mlp, MlpTrace, Parameters, Tensor};
use crate::rng::SimRng;

/// A state-action value function over episode prefixes.
///
/// `trace` evaluates the prefixes of `episode` with the given lengths
/// (ascending) and keeps what `backward` needs, so a recurrent network can
/// serve every prefix of one episode from a single unroll.
pub trait QNetwork: Parameters + Clone + IsPolicy {
    type Trace;

    fn q_values(&self, history: &[(usize, Response)]) -> Result<Vec<f64>>;

    fn trace(&self, episode: &[(usize, Response)], lengths: &[usize], rng: Option<&mut SimRng>) -> Result<Self::Trace>;

    /// Q-vectors of a trace, aligned with the requested lengths.
    fn trace_q(trace: &Self::Trace) -> &[Vec<f64>];

    /// Accumulate `sum_i <dq[i], Q(prefix_i)>` gradients into `grad`.
    fn backward(&self, trace: &Self::Trace, dq: &[Vec<f64>], grad: &mut Self) -> Result<()>;
}

fn check_lengths(episode: &[(usize, Response)], lengths: &[usize]) -> Result<()> {
    if lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("prefix lengths must be strictly ascending".into()));
    }
    match lengths.last() {
        Some(&l) if l > episode.len() => Err(Error::OutOfRange {
            what: "prefix length",
            index: l,
            len: episode.len() + 1,
        }),
        _ => Ok(()),
    }
}

/// Flat MLP over the `4N` state encoding. With no hidden layers it is the
/// linear agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DqnNet {
    pub mlp: Mlp,
    questions: usize,
}

#[derive(Debug, Clone)]
pub struct DqnTrace {
    traces: Vec<MlpTrace>,
    q: Vec<Vec<f64>>,
}

impl DqnNet {
    /// `4N -> hidden... -> N`, relu hidden layers and tanh output.
    pub fn new(questions: usize, hidden: &[usize], rng: &mut SimRng) -> Self {
        let mut sizes = vec![4 * questions];
        sizes.extend_from_slice(hidden);
        sizes.push(questions);
        DqnNet {
            mlp: Mlp::new(&sizes, Activation::Relu, Activation::Tanh, rng),
            questions,
        }
    }

    /// Single affine map with tanh output.
    pub fn linear(questions: usize, rng: &mut SimRng) -> Self {
        DqnNet::new(questions, &[], rng)
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        let questions = mlp.output_dim();
        if questions == 0 || mlp.input_dim() != 4 * questions {
            return Err(Error::Shape(format!(
                "dqn net needs input 4N for output N, got {} -> {}",
                mlp.input_dim(),
                questions
            )));
        }
        Ok(DqnNet { mlp, questions })
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.mlp.layers[..self.mlp.layers.len() - 1]
            .iter()
            .map(DenseLayer::output_dim)
            .collect()
    }
}

impl Parameters for DqnNet {
    fn tensors(&self) -> Vec<&Tensor> {
        self.mlp.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.mlp.tensors_mut()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.mlp.tensor_names()
    }
}

impl QNetwork for DqnNet {
    type Trace = DqnTrace;

    fn q_values(&self, history: &[(usize, Response)]) -> Result<Vec<f64>> {
        self.mlp.forward(&encode_state_dqn(history, self.questions))
    }

    fn trace(&self, episode: &[(usize, Response)], lengths: &[usize], mut rng: Option<&mut SimRng>) -> Result<DqnTrace> {
        check_lengths(episode, lengths)?;
        let mut traces = Vec::with_capacity(lengths.len());
        let mut q = Vec::with_capacity(lengths.len());
        for &l in lengths {
            let x = encode_state_dqn(&episode[..l], self.questions);
            let t = self.mlp.forward_trace(&x, rng.as_deref_mut())?;
            q.push(t.output().to_vec());
            traces.push(t);
        }
        Ok(DqnTrace { traces, q })
    }

    fn trace_q(trace: &DqnTrace) -> &[Vec<f64>] {
        &trace.q
    }

    fn backward(&self, trace: &DqnTrace, dq: &[Vec<f64>], grad: &mut Self) -> Result<()> {
        for (t, d) in trace.traces.iter().zip(dq) {
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            self.mlp.backward(t, d, &mut grad.mlp)?;
        }
        Ok(())
    }
}

impl IsPolicy for DqnNet {
    fn num_questions(&self) -> usize {
        self.questions
    }

    fn select(&self, history: &EpisodeHistory, epsilon: f64, rng: &mut SimRng) -> Result<usize> {
        let q = self.q_values(history.steps())?;
        select_action(&q, history.asked_mask(), epsilon, rng)
    }
}

/// Embedding widths for questions and responses, and the LSTM width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrqnSizes {
    pub question_dim: usize,
    pub response_dim: usize,
    pub hidden: usize,
}

impl Default for DrqnSizes {
    fn default() -> Self {
        DrqnSizes {
            question_dim: 30,
            response_dim: 2,
            hidden: 32,
        }
    }
}

/// Question and response embeddings feeding an LSTM, with a tanh head on
/// the hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct DrqnNet {
    pub question_emb: EmbeddingTable,
    pub response_emb: EmbeddingTable,
    pub lstm: LstmCell,
    pub head: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct DrqnTrace {
    steps: Vec<LstmStep>,
    lengths: Vec<usize>,
    prefix: Vec<(usize, Response)>,
    q: Vec<Vec<f64>>,
}

/// Observation for the step after `prev`: the concatenated embeddings, or
/// zeros at the start of an episode.
pub fn encode_observation_drqn(net: &DrqnNet, prev: Option<(usize, Response)>) -> Result<Vec<f64>> {
    let width = net.question_emb.dim() + net.response_emb.dim();
    match prev {
        None => Ok(vec![0.0; width]),
        Some((q, r)) => {
            let mut o = Vec::with_capacity(width);
            o.extend_from_slice(net.question_emb.lookup(q)?);
            o.extend_from_slice(net.response_emb.lookup(r.code())?);
            Ok(o)
        }
    }
}

impl DrqnNet {
    pub fn new(questions: usize, sizes: DrqnSizes, rng: &mut SimRng) -> Self {
        let question_emb = EmbeddingTable::new(questions, sizes.question_dim, rng);
        let response_emb = EmbeddingTable::new(3, sizes.response_dim, rng);
        let lstm = LstmCell::new(sizes.question_dim + sizes.response_dim, sizes.hidden, rng);
        let head = DenseLayer::new(sizes.hidden, questions, Activation::Tanh, rng);
        DrqnNet {
            question_emb,
            response_emb,
            lstm,
            head,
        }
    }

    pub fn sizes(&self) -> DrqnSizes {
        DrqnSizes {
            question_dim: self.question_emb.dim(),
            response_dim: self.response_emb.dim(),
            hidden: self.lstm.hidden_dim(),
        }
    }

    fn observations(&self, prefix: &[(usize, Response)]) -> Result<Vec<Vec<f64>>> {
        let mut obs = Vec::with_capacity(prefix.len() + 1);
        obs.push(encode_observation_drqn(self, None)?);
        for &p in prefix {
            obs.push(encode_observation_drqn(self, Some(p))?);
        }
        Ok(obs)
    }

    /// Recurrent state `(h, c)` after consuming `prefix`.
    pub fn state(&self, prefix: &[(usize, Response)]) -> Result<(Vec<f64>, Vec<f64>)> {
        let steps = self.lstm.unroll(&self.observations(prefix)?)?;
        let last = steps.last().expect("at least the start observation");
        Ok((last.h.clone(), last.c.clone()))
    }
}

impl Parameters for DrqnNet {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut t = self.question_emb.tensors();
        t.extend(self.response_emb.tensors());
        t.extend(self.lstm.tensors());
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut t = self.question_emb.tensors_mut();
        t.extend(self.response_emb.tensors_mut());
        t.extend(self.lstm.tensors_mut());
        t.extend(self.head.tensors_mut());
        t
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (prefix, inner) in [
            ("question_emb", self.question_emb.tensor_names()),
            ("response_emb", self.response_emb.tensor_names()),
            ("lstm", self.lstm.tensor_names()),
            ("head", self.head.tensor_names()),
        ] {
            names.extend(inner.into_iter().map(|n| format!("{prefix}.{n}")));
        }
        names
    }
}

impl QNetwork for DrqnNet {
    type Trace = DrqnTrace;

    fn q_values(&self, history: &[(usize, Response)]) -> Result<Vec<f64>> {
        let (h, _) = self.state(history)?;
        self.head.forward(&h)
    }

    fn trace(&self, episode: &[(usize, Response)], lengths: &[usize], _rng: Option<&mut SimRng>) -> Result<DrqnTrace> {
        check_lengths(episode, lengths)?;
        let longest = lengths.last().copied().unwrap_or(0);
        let prefix = episode[..longest].to_vec();
        let steps = self.lstm.unroll(&self.observations(&prefix)?)?;
        let q = lengths
            .iter()
            .map(|&l| self.head.forward(&steps[l].h))
            .collect::<Result<Vec<_>>>()?;
        Ok(DrqnTrace {
            steps,
            lengths: lengths.to_vec(),
            prefix,
            q,
        })
    }

    fn trace_q(trace: &DrqnTrace) -> &[Vec<f64>] {
        &trace.q
    }

    fn backward(&self, trace: &DrqnTrace, dq: &[Vec<f64>], grad: &mut Self) -> Result<()> {
        let hidden = self.lstm.hidden_dim();
        let mut dh = vec![vec![0.0; hidden]; trace.steps.len()];
        for ((&l, q), d) in trace.lengths.iter().zip(&trace.q).zip(dq) {
            if d.iter().all(|&v| v == 0.0) {
                continue;
            }
            let g = self.head.backward(&trace.steps[l].h, q, d, &mut grad.head)?;
            dh[l].iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        let dxs = self.lstm.backward_through_time(&trace.steps, &dh, &mut grad.lstm)?;
        let qd = self.question_emb.dim();
        for (t, dx) in dxs.iter().enumerate().skip(1) {
            let (q, r) = trace.prefix[t - 1];
            EmbeddingTable::accumulate(&mut grad.question_emb, q, &dx[..qd]);
            EmbeddingTable::accumulate(&mut grad.response_emb, r.code(), &dx[qd..]);
        }
        Ok(())
    }
}

impl IsPolicy for DrqnNet {
    fn num_questions(&self) -> usize {
        self.head.output_dim()
    }

    fn select(&self, history: &EpisodeHistory, epsilon: f64, rng: &mut SimRng) -> Result<usize> {
        let q = self.q_values(history.steps())?;
        select_action(&q, history.asked_mask(), epsilon, rng)
    }
}
