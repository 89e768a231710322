use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{affine, affine_backward, Activation, Parameters, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// `y = act(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    /// Weights and biases uniform in `±1/sqrt(input)`.
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / math::sqrt(input.max(1) as f64);
        DenseLayer {
            weight: Tensor::uniform(&[output, input], bound, rng),
            bias: Tensor::uniform(&[output], bound, rng),
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
            activation,
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::Shape(format!(
                "dense weight {:?} incompatible with bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "dense layer expects input of {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut y = vec![0.0; self.output_dim()];
        affine(self.weight.data(), self.bias.data(), x, &mut y);
        for v in &mut y {
            *v = self.activation.apply(*v);
        }
        Ok(y)
    }

    /// Backpropagate `dy` through the layer given its input `x` and output `y`.
    /// Parameter gradients are added into `grad`; returns `dL/dx`.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grad: &mut DenseLayer) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() || y.len() != self.output_dim() || dy.len() != y.len() {
            return Err(Error::Shape(format!(
                "dense backward: x {} y {} dy {} for {}x{} layer",
                x.len(),
                y.len(),
                dy.len(),
                self.output_dim(),
                self.input_dim()
            )));
        }
        let dz: Vec<f64> = y
            .iter()
            .zip(dy)
            .map(|(&yi, &g)| g * self.activation.derivative_from_output(yi))
            .collect();
        let mut dx = vec![0.0; x.len()];
        affine_backward(
            self.weight.data(),
            x,
            &dz,
            grad.weight.data_mut(),
            grad.bias.data_mut(),
            &mut dx,
        );
        Ok(dx)
    }
}

impl Parameters for DenseLayer {
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
