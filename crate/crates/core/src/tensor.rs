//! Tensor coefficient arrays at a point.
//!
//! A tensor is stored as a row-major array over its slots. Each slot is
//! either covariant (`e^i`) or contravariant (`e_i`); `p` counts the
//! contravariant slots and `q` the covariant ones. The curvature tensor, for
//! instance, uses slots `[Co, Co, Co, Contra]` for `R^l_ijk e^i e^j e^k e_l`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Co,
    Contra,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    dim: usize,
    slots: Vec<Slot>,
    coeffs: Vec<T>,
}

/// Tensor with real coefficients at a single point.
pub type TensorFieldValue = Tensor<f64>;

impl<T: Clone> Tensor<T> {
    pub fn new(dim: usize, slots: Vec<Slot>, coeffs: Vec<T>) -> Result<Self> {
        let expected = dim.pow(slots.len() as u32);
        if coeffs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} slots in dimension {dim} need {expected} coefficients, got {}",
                slots.len(),
                coeffs.len()
            )));
        }
        Ok(Tensor { dim, slots, coeffs })
    }

    pub fn filled(dim: usize, slots: Vec<Slot>, value: T) -> Self {
        let n = dim.pow(slots.len() as u32);
        Tensor {
            dim,
            slots,
            coeffs: vec![value; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Contravariant order.
    pub fn p(&self) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Contra).count()
    }

    /// Covariant order.
    pub fn q(&self) -> usize {
        self.slots.iter().filter(|s| **s == Slot::Co).count()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.slots.len());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    /// Multi-index of a flat position.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.slots.len()];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
        idx
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.coeffs[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let k = self.flat_index(idx);
        self.coeffs[k] = value;
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Tensor<U> {
        Tensor {
            dim: self.dim,
            slots: self.slots.clone(),
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }
}

impl Tensor<f64> {
    pub fn zeros(dim: usize, slots: Vec<Slot>) -> Self {
        Self::filled(dim, slots, 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Applies `m` to slot `s`: `out[..j..] = sum_i m[(i, j)] self[..i..]`.
    fn apply_to_slot(&self, s: usize, m: &DMatrix<f64>) -> Vec<f64> {
        let d = self.dim;
        let stride = d.pow((self.slots.len() - s - 1) as u32);
        let mut out = vec![0.0; self.coeffs.len()];
        for (flat, slot_out) in out.iter_mut().enumerate() {
            let j = (flat / stride) % d;
            let base = flat - j * stride;
            let mut acc = 0.0;
            for i in 0..d {
                acc += m[(i, j)] * self.coeffs[base + i * stride];
            }
            *slot_out = acc;
        }
        out
    }

    /// The `g`-norm: contract covariant slots with `g^{ij}` and contravariant
    /// slots with `g_ij`.
    pub fn norm_with(&self, g: &DMatrix<f64>, g_inv: &DMatrix<f64>) -> Result<f64> {
        if g.nrows() != self.dim || g_inv.nrows() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "tensor of dimension {} against a {}x{} metric",
                self.dim,
                g.nrows(),
                g.ncols()
            )));
        }
        if self.slots.is_empty() {
            return Ok(self.coeffs[0].abs());
        }
        let mut work = self.clone();
        for (s, slot) in self.slots.iter().enumerate() {
            let m = match slot {
                Slot::Co => g_inv,
                Slot::Contra => g,
            };
            work.coeffs = work.apply_to_slot(s, m);
        }
        let sq: f64 = self
            .coeffs
            .iter()
            .zip(&work.coeffs)
            .map(|(a, b)| a * b)
            .sum();
        Ok(sq.max(0.0).sqrt())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.slots != other.slots {
            return Err(Error::ShapeMismatch(
                "tensor difference needs equal shapes".into(),
            ));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Tensor {
            dim: self.dim,
            slots: self.slots.clone(),
            coeffs,
        })
    }

    /// Coefficients in new coordinates `y` with `x = A y`: covariant slots
    /// pick up `A`, contravariant slots `A^{-1}`.
    pub fn pull_back_linear(&self, a: &DMatrix<f64>) -> Result<Self> {
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("linear chart change is singular".into()))?;
        let mut work = self.clone();
        for (s, slot) in self.slots.iter().enumerate() {
            // out[..j..] = sum_i M[(i, j)] in[..i..]
            let m = match slot {
                Slot::Co => a.clone(),
                Slot::Contra => a_inv.transpose(),
            };
            work.coeffs = work.apply_to_slot(s, &m);
        }
        Ok(work)
    }
}
