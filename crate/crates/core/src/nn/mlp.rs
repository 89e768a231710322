use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::{Activation, DenseLayer, Parameters, Tensor};
use crate::error::Result;

/// A stack of dense layers with optional inverted dropout on hidden outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    /// Dropout rate applied to hidden activations in training passes.
    pub dropout: f64,
}

/// Activations (and dropout masks) recorded by a training forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// `activations[0]` is the input; `activations[i + 1]` the output of layer `i`.
    pub activations: Vec<Vec<f64>>,
    pre_dropout: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        let last = sizes.len().saturating_sub(2);
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| DenseLayer::new(w[0], w[1], if i == last { output } else { hidden }, rng))
            .collect();
        Mlp { layers, dropout: 0.0 }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, DenseLayer::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, DenseLayer::output_dim)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer.forward(&a)?;
        }
        Ok(a)
    }

    /// Forward pass keeping what `backward` needs. Dropout is applied only
    /// when an rng is supplied and the rate is positive.
    pub fn forward_trace<R: Rng + ?Sized>(&self, x: &[f64], mut rng: Option<&mut R>) -> Result<MlpTrace> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_dropout = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(activations.last().unwrap())?;
            let mask = match rng.as_deref_mut() {
                Some(r) if i < last && self.dropout > 0.0 => {
                    let keep = 1.0 - self.dropout;
                    Some(
                        (0..y.len())
                            .map(|_| if r.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect::<Vec<f64>>(),
                    )
                }
                _ => None,
            };
            let out = match &mask {
                Some(m) => y.iter().zip(m).map(|(a, b)| a * b).collect(),
                None => y.clone(),
            };
            pre_dropout.push(y);
            masks.push(mask);
            activations.push(out);
        }
        Ok(MlpTrace {
            activations,
            pre_dropout,
            masks,
        })
    }

    /// Accumulate parameter gradients into `grad`; returns `dL/dx`.
    pub fn backward(&self, trace: &MlpTrace, dy: &[f64], grad: &mut Mlp) -> Result<Vec<f64>> {
        let mut g = dy.to_vec();
        for i in (0..self.layers.len()).rev() {
            if let Some(mask) = &trace.masks[i] {
                g.iter_mut().zip(mask).for_each(|(a, b)| *a *= b);
            }
            g = self.layers[i].backward(
                &trace.activations[i],
                &trace.pre_dropout[i],
                &g,
                &mut grad.layers[i],
            )?;
        }
        Ok(g)
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.tensor_names().into_iter().map(move |n| format!("layer{i}.{n}")))
            .collect()
    }
}
