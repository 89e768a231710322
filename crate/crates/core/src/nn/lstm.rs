use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{affine, affine_backward, Parameters, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// Standard LSTM cell. Gate rows in `weight` are stacked as
/// input, forget, output, candidate; columns are `[x ; h_prev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub weight: Tensor,
    pub bias: Tensor,
    input: usize,
    hidden: usize,
}

/// Everything one forward step needs for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    /// `[x ; h_prev]`
    pub joined: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub input_gate: Vec<f64>,
    pub forget_gate: Vec<f64>,
    pub output_gate: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let fan_in = input + hidden;
        let bound = 1.0 / math::sqrt(fan_in.max(1) as f64);
        LstmCell {
            weight: Tensor::uniform(&[4 * hidden, fan_in], bound, rng),
            bias: Tensor::uniform(&[4 * hidden], bound, rng),
            input,
            hidden,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCell {
            weight: Tensor::zeros(&[4 * hidden, input + hidden]),
            bias: Tensor::zeros(&[4 * hidden]),
            input,
            hidden,
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        let shape = weight.shape();
        if shape.len() != 2 || shape[0] % 4 != 0 || shape[1] < shape[0] / 4 || bias.shape() != [shape[0]] {
            return Err(Error::Shape(format!(
                "lstm weight {:?} / bias {:?} are not a valid cell",
                shape,
                bias.shape()
            )));
        }
        let hidden = shape[0] / 4;
        let input = shape[1] - hidden;
        Ok(LstmCell {
            weight,
            bias,
            input,
            hidden,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn step(&self, h_prev: &[f64], c_prev: &[f64], x: &[f64]) -> Result<LstmStep> {
        let h = self.hidden;
        if x.len() != self.input || h_prev.len() != h || c_prev.len() != h {
            return Err(Error::Shape(format!(
                "lstm step: x {} h {} c {} for input {} hidden {}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.input,
                h
            )));
        }
        let mut joined = Vec::with_capacity(self.input + h);
        joined.extend_from_slice(x);
        joined.extend_from_slice(h_prev);
        let mut z = vec![0.0; 4 * h];
        affine(self.weight.data(), self.bias.data(), &joined, &mut z);
        let input_gate: Vec<f64> = z[..h].iter().map(|&v| math::sigmoid(v)).collect();
        let forget_gate: Vec<f64> = z[h..2 * h].iter().map(|&v| math::sigmoid(v)).collect();
        let output_gate: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| math::sigmoid(v)).collect();
        let candidate: Vec<f64> = z[3 * h..].iter().map(|&v| math::tanh(v)).collect();
        let c: Vec<f64> = (0..h)
            .map(|k| forget_gate[k] * c_prev[k] + input_gate[k] * candidate[k])
            .collect();
        let hs: Vec<f64> = (0..h).map(|k| output_gate[k] * math::tanh(c[k])).collect();
        Ok(LstmStep {
            joined,
            c_prev: c_prev.to_vec(),
            input_gate,
            forget_gate,
            output_gate,
            candidate,
            c,
            h: hs,
        })
    }

    /// Run a sequence from the zero state.
    pub fn unroll(&self, inputs: &[Vec<f64>]) -> Result<Vec<LstmStep>> {
        let mut steps: Vec<LstmStep> = Vec::with_capacity(inputs.len());
        let zero = vec![0.0; self.hidden];
        for x in inputs {
            let (h, c) = match steps.last() {
                Some(s) => (s.h.as_slice(), s.c.as_slice()),
                None => (zero.as_slice(), zero.as_slice()),
            };
            let next = self.step(h, c, x)?;
            steps.push(next);
        }
        Ok(steps)
    }

    /// Backward through one step. Returns `(dx, dh_prev, dc_prev)` and adds
    /// parameter gradients into `grad`.
    pub fn backward_step(
        &self,
        step: &LstmStep,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let tc = math::tanh(step.c[k]);
            let o = step.output_gate[k];
            let i = step.input_gate[k];
            let f = step.forget_gate[k];
            let g = step.candidate[k];
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            dz[k] = dct * g * i * (1.0 - i);
            dz[h + k] = dct * step.c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dh[k] * tc * o * (1.0 - o);
            dz[3 * h + k] = dct * i * (1.0 - g * g);
            dc_prev[k] = dct * f;
        }
        let mut djoined = vec![0.0; self.input + h];
        affine_backward(
            self.weight.data(),
            &step.joined,
            &dz,
            grad.weight.data_mut(),
            grad.bias.data_mut(),
            &mut djoined,
        );
        let dh_prev = djoined.split_off(self.input);
        (djoined, dh_prev, dc_prev)
    }

    /// Backpropagation through time. `dh[t]` is the loss gradient arriving at
    /// the hidden output of step `t` from outside the recurrence. Returns the
    /// gradient for every step's input.
    pub fn backward_through_time(
        &self,
        steps: &[LstmStep],
        dh: &[Vec<f64>],
        grad: &mut LstmCell,
    ) -> Result<Vec<Vec<f64>>> {
        if dh.len() != steps.len() {
            return Err(Error::Shape(format!(
                "bptt: {} steps but {} output gradients",
                steps.len(),
                dh.len()
            )));
        }
        let h = self.hidden;
        let mut carry_h = vec![0.0; h];
        let mut carry_c = vec![0.0; h];
        let mut dxs = vec![Vec::new(); steps.len()];
        for t in (0..steps.len()).rev() {
            let total: Vec<f64> = dh[t].iter().zip(&carry_h).map(|(a, b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = self.backward_step(&steps[t], &total, &carry_c, grad);
            dxs[t] = dx;
            carry_h = dh_prev;
            carry_c = dc_prev;
        }
        Ok(dxs)
    }
}

impl Parameters for LstmCell {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["weight".into(), "bias".into()]
    }
}
