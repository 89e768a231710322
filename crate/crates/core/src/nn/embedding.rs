use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{Parameters, Tensor};
use crate::error::{Error, Result};
use crate::math;

/// A `rows x dim` lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub table: Tensor,
}

impl EmbeddingTable {
    /// Entries uniform in `±1/sqrt(dim)`.
    pub fn new<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / math::sqrt(dim.max(1) as f64);
        EmbeddingTable {
            table: Tensor::uniform(&[rows, dim], bound, rng),
        }
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingTable {
            table: Tensor::zeros(&[rows, dim]),
        }
    }

    pub fn rows(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn lookup(&self, idx: usize) -> Result<&[f64]> {
        if idx >= self.rows() {
            return Err(Error::OutOfRange {
                what: "embedding row",
                index: idx,
                len: self.rows(),
            });
        }
        Ok(self.table.row(idx))
    }

    /// Add `g` into row `idx` of a gradient table.
    pub fn accumulate(grad: &mut EmbeddingTable, idx: usize, g: &[f64]) {
        for (a, b) in grad.table.row_mut(idx).iter_mut().zip(g) {
            *a += b;
        }
    }
}

impl Parameters for EmbeddingTable {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.table]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.table]
    }

    fn tensor_names(&self) -> Vec<String> {
        vec!["table".into()]
    }
}
