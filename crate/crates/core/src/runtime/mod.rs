//! The compressed artifact: sketched parameters plus a frozen mapping.
//!
//! Row `i` of the reconstructed matrix reads
//! `Ŵ[i, j] = sketched[i, group(j), indices[i, j]]` with
//! `group(j) = ⌊j·gpr/c⌋`. All row-parallel operations write into row-indexed
//! slots, so results do not depend on the worker count.

mod packing;
mod skt1;

pub use packing::{pack_indices, pack_row, packed_row_len, unpack_indices, unpack_row};
pub use skt1::{load_skt1, read_skt1, save_skt1, serialized_len, write_skt1, SKT1_HEADER_LEN, SKT1_VERSION};

use rayon::prelude::*;

use crate::learner::RowSketch;
use crate::numerics::{axpy, dot, Matrix};
use crate::{Error, Result};

/// Sketched parameters (`rows × gpr × k`, trainable) and mapping indices
/// (`rows × cols`, frozen).
#[derive(Clone, Debug, PartialEq)]
pub struct SketchedMatrix {
    rows: usize,
    cols: usize,
    gpr: usize,
    bits: u8,
    sketched: Vec<f64>,
    indices: Vec<u8>,
}

/// `∂L/∂sketched`, laid out like [`SketchedMatrix::sketched`].
#[derive(Clone, Debug, PartialEq)]
pub struct SketchGradient {
    pub rows: usize,
    pub gpr: usize,
    pub k: usize,
    pub grad: Vec<f64>,
}

impl SketchGradient {
    pub fn zeros(rows: usize, gpr: usize, k: usize) -> Self {
        Self {
            rows,
            gpr,
            k,
            grad: vec![0.0; rows * gpr * k],
        }
    }

    pub fn at(&self, row: usize, group: usize, center: usize) -> f64 {
        self.grad[(row * self.gpr + group) * self.k + center]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.grad
    }

    pub fn max_abs(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl SketchedMatrix {
    pub fn new(rows: usize, cols: usize, gpr: usize, bits: u8, sketched: Vec<f64>, indices: Vec<u8>) -> Result<Self> {
        if !(2..=4).contains(&bits) {
            return Err(Error::Unsupported {
                what: "index width (bits)",
                value: bits as u64,
            });
        }
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "sketched matrix needs positive dims, got {rows}x{cols}"
            )));
        }
        if gpr == 0 || !cols.is_multiple_of(gpr) {
            return Err(Error::invalid(format!("gpr {gpr} does not divide {cols} columns")));
        }
        let k = 1usize << bits;
        if sketched.len() != rows * gpr * k {
            return Err(Error::invalid(format!(
                "expected {} sketched parameters, got {}",
                rows * gpr * k,
                sketched.len()
            )));
        }
        if indices.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} indices, got {}",
                rows * cols,
                indices.len()
            )));
        }
        if sketched.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sketched parameters"));
        }
        if let Some(&bad) = indices.iter().find(|&&m| m as usize >= k) {
            return Err(Error::invalid(format!("index {bad} out of range for k = {k}")));
        }
        Ok(Self {
            rows,
            cols,
            gpr,
            bits,
            sketched,
            indices,
        })
    }

    pub fn from_row_sketches(cols: usize, gpr: usize, bits: u8, rows: Vec<RowSketch>) -> Result<Self> {
        let r = rows.len();
        let mut sketched = Vec::with_capacity(r * gpr * (1 << bits));
        let mut indices = Vec::with_capacity(r * cols);
        for row in rows {
            sketched.extend_from_slice(&row.centers);
            indices.extend_from_slice(&row.indices);
        }
        Self::new(r, cols, gpr, bits, sketched, indices)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn gpr(&self) -> usize {
        self.gpr
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn k(&self) -> usize {
        1 << self.bits
    }

    pub fn group_len(&self) -> usize {
        self.cols / self.gpr
    }

    /// Group of column `j`.
    pub fn group(&self, j: usize) -> usize {
        j / self.group_len()
    }

    pub fn sketched(&self) -> &[f64] {
        &self.sketched
    }

    /// Mutable sketched parameters; the mapping stays frozen.
    pub fn sketched_mut(&mut self) -> &mut [f64] {
        &mut self.sketched
    }

    pub fn sketched_at(&self, row: usize, group: usize, center: usize) -> f64 {
        self.sketched[(row * self.gpr + group) * self.k() + center]
    }

    pub fn sketched_row(&self, i: usize) -> &[f64] {
        let n = self.gpr * self.k();
        &self.sketched[i * n..(i + 1) * n]
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn indices_row(&self, i: usize) -> &[u8] {
        &self.indices[i * self.cols..(i + 1) * self.cols]
    }

    /// Number of trainable values, `rows·gpr·k`.
    pub fn trainable_params(&self) -> usize {
        self.sketched.len()
    }

    /// Copy with every sketched parameter rounded to `f32`, the on-disk
    /// precision.
    pub fn rounded_to_f32(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.sketched {
            *v = *v as f32 as f64;
        }
        out
    }

    fn reconstruct_row_into(&self, i: usize, out: &mut [f64]) {
        let k = self.k();
        let glen = self.group_len();
        let params = self.sketched_row(i);
        for (g, (dst, idx)) in out
            .chunks_exact_mut(glen)
            .zip(self.indices_row(i).chunks_exact(glen))
            .enumerate()
        {
            let centers = &params[g * k..(g + 1) * k];
            for (d, &m) in dst.iter_mut().zip(idx) {
                *d = centers[m as usize];
            }
        }
    }

    /// Reconstructed row `i`.
    pub fn reconstruct_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.reconstruct_row_into(i, &mut out);
        out
    }

    /// `Ŵ`, a pure lookup.
    pub fn reconstruct(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        out.as_mut_slice()
            .par_chunks_mut(self.cols)
            .enumerate()
            .for_each(|(i, row)| self.reconstruct_row_into(i, row));
        out
    }

    /// `M·X` restricted to row `i`: `gpr·k` rows of length `x.cols()`, row
    /// `g·k + m` summing the inputs mapped to center `m` of group `g`.
    fn mapped_inputs(&self, i: usize, x: &Matrix) -> Vec<f64> {
        let (k, glen, n) = (self.k(), self.group_len(), x.cols());
        let mut acc = vec![0.0; self.gpr * k * n];
        for (j, &m) in self.indices_row(i).iter().enumerate() {
            let slot = (j / glen) * k + m as usize;
            axpy(1.0, x.row(j), &mut acc[slot * n..(slot + 1) * n]);
        }
        acc
    }

    /// `Ŵ·X` without materializing `Ŵ`: inputs are first summed per mapping
    /// slot, then combined with the sketched parameters.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.cols {
            return Err(Error::dims("forward", self.shape(), x.shape()));
        }
        let n = x.cols();
        let mut out = Matrix::zeros(self.rows, n);
        out.as_mut_slice().par_chunks_mut(n).enumerate().for_each(|(i, y)| {
            let mx = self.mapped_inputs(i, x);
            for (slot, &p) in self.sketched_row(i).iter().enumerate() {
                if p != 0.0 {
                    axpy(p, &mx[slot * n..(slot + 1) * n], y);
                }
            }
        });
        Ok(out)
    }

    /// `∂L/∂sketched` from `∂L/∂Ŵ`: scatter-add over the mapping, columns in
    /// ascending order.
    pub fn grad_sketched(&self, upstream: &Matrix) -> Result<SketchGradient> {
        if upstream.shape() != self.shape() {
            return Err(Error::dims("grad_sketched", self.shape(), upstream.shape()));
        }
        let (k, glen) = (self.k(), self.group_len());
        let mut out = SketchGradient::zeros(self.rows, self.gpr, k);
        out.grad.par_chunks_mut(self.gpr * k).enumerate().for_each(|(i, acc)| {
            for (j, (&m, &u)) in self.indices_row(i).iter().zip(upstream.row(i)).enumerate() {
                acc[(j / glen) * k + m as usize] += u;
            }
        });
        Ok(out)
    }

    /// `∂L/∂sketched` from the output gradient: `(∂L/∂Y)(MX)ᵀ` per row.
    pub fn grad_from_output(&self, x: &Matrix, d_out: &Matrix) -> Result<SketchGradient> {
        if x.rows() != self.cols {
            return Err(Error::dims("grad_from_output", self.shape(), x.shape()));
        }
        if d_out.rows() != self.rows || d_out.cols() != x.cols() {
            return Err(Error::dims("grad_from_output", d_out.shape(), (self.rows, x.cols())));
        }
        let n = x.cols();
        let mut out = SketchGradient::zeros(self.rows, self.gpr, self.k());
        out.grad
            .par_chunks_mut(self.gpr * self.k())
            .enumerate()
            .for_each(|(i, acc)| {
                let mx = self.mapped_inputs(i, x);
                for (slot, a) in acc.iter_mut().enumerate() {
                    *a = dot(d_out.row(i), &mx[slot * n..(slot + 1) * n]);
                }
            });
        Ok(out)
    }
}
