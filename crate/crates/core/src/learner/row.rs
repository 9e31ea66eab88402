//! Row-wise sketch learning with block-wise error compensation.

use rayon::prelude::*;

use super::config::SketchConfig;
use super::kmeans::weighted_kmeans;
use super::sketching::{build_sketching_matrix, rtn};
use crate::calibration::HessianFactor;
use crate::numerics::{axpy, Matrix, Rng};
use crate::parallel::with_threads;
use crate::runtime::SketchedMatrix;
use crate::{Error, Result};

/// Sketch of a single weight row: `gpr × k` centers and one index per column.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSketch {
    pub centers: Vec<f64>,
    pub indices: Vec<u8>,
}

impl RowSketch {
    pub fn reconstruct(&self, gpr: usize, k: usize) -> Vec<f64> {
        let group_len = self.indices.len() / gpr;
        self.indices
            .iter()
            .enumerate()
            .map(|(j, &m)| self.centers[(j / group_len) * k + m as usize])
            .collect()
    }
}

/// k-means weights `(1/H⁻¹ᵢᵢ)^s`, rescaled by the group's smallest `H⁻¹ᵢᵢ`
/// so the largest weight is 1. Clustering is invariant to a global weight
/// scale; the rescale keeps large `s` from overflowing.
pub(crate) fn group_weights(inv_diag: &[f64], exponent: f64) -> Vec<f64> {
    let min = inv_diag.iter().copied().fold(f64::INFINITY, f64::min);
    inv_diag
        .iter()
        .map(|&d| {
            let ratio = min / d;
            let w = if exponent.fract() == 0.0 && exponent.abs() < 64.0 {
                ratio.powi(exponent as i32)
            } else {
                ratio.powf(exponent)
            };
            w.max(f64::MIN_POSITIVE)
        })
        .collect()
}

fn validate_row(w: &[f64], hf: &HessianFactor, cfg: &SketchConfig) -> Result<()> {
    if w.len() != hf.dim() {
        return Err(Error::dims("sketch row", (1, w.len()), hf.h.shape()));
    }
    cfg.validate_for(w.len())?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weight row"));
    }
    Ok(())
}

fn sketch_row(w: &[f64], hf: &HessianFactor, cfg: &SketchConfig, rng: &mut Rng, compensate: bool) -> Result<RowSketch> {
    validate_row(w, hf, cfg)?;
    let c = w.len();
    let k = cfg.k();
    let group_len = c / cfg.gpr;
    let block = cfg.block_b;
    let opts = cfg.kmeans_options();
    let d = &hf.chol_upper;

    let mut w = w.to_vec();
    let mut centers = Vec::with_capacity(cfg.gpr * k);
    let mut indices = vec![0u8; c];
    let mut err = vec![0.0; block];

    for g in 0..cfg.gpr {
        let (g0, g1) = (g * group_len, (g + 1) * group_len);
        // Centers are learned on the current sub-row, which already carries
        // the compensation pushed in from earlier groups.
        let weights = group_weights(&hf.inv_diag[g0..g1], cfg.exponent_s);
        let assign = weighted_kmeans(&w[g0..g1], &weights, k, rng, &opts)?;
        let s = build_sketching_matrix(&assign, &weights)?;
        let mut group_centers = s.apply(&w[g0..g1])?;
        for (j, gc) in group_centers.iter_mut().enumerate() {
            if !s.is_live(j) {
                *gc = assign.centers[j];
            }
        }

        let mut i = g0;
        while i < g1 {
            let end = (i + block).min(g1);
            for j in i..end {
                let (m, q) = rtn(w[j], &group_centers);
                indices[j] = m as u8;
                if !compensate {
                    continue;
                }
                let e = (w[j] - q) / d[(j, j)];
                err[j - i] = e;
                let drow = d.row(j);
                axpy(-e, &drow[j + 1..end], &mut w[j + 1..end]);
            }
            if compensate && end < c {
                // push the block's error into every later column of the row
                for j in i..end {
                    let e = err[j - i];
                    if e != 0.0 {
                        axpy(-e, &d.row(j)[end..], &mut w[end..]);
                    }
                }
            }
            i = end;
        }
        centers.extend_from_slice(&group_centers);
    }
    Ok(RowSketch { centers, indices })
}

/// Learn the sketch of one weight row: per group, weighted k-means on the
/// current sub-row gives the centers (`w·S`); then columns are mapped one by
/// one to their nearest center while the mapping error is compensated on the
/// not-yet-mapped columns, within blocks of `block_b` columns and then across
/// the rest of the row.
pub fn learn_to_sketch_row(w: &[f64], hf: &HessianFactor, cfg: &SketchConfig, rng: &mut Rng) -> Result<RowSketch> {
    sketch_row(w, hf, cfg, rng, true)
}

/// Baseline with compensation disabled: per-group centers from the original
/// sub-row and plain round-to-nearest.
pub fn rtn_sketch_row(w: &[f64], hf: &HessianFactor, cfg: &SketchConfig, rng: &mut Rng) -> Result<RowSketch> {
    sketch_row(w, hf, cfg, rng, false)
}

/// `‖(w − ŵ)X‖²`, the layer-output distortion of a reconstructed row.
pub fn output_error(w: &[f64], w_hat: &[f64], x: &Matrix) -> f64 {
    assert_eq!(w.len(), x.rows());
    let mut out = vec![0.0; x.cols()];
    for (i, (a, b)) in w.iter().zip(w_hat).enumerate() {
        let diff = a - b;
        if diff != 0.0 {
            axpy(diff, x.row(i), &mut out);
        }
    }
    out.iter().map(|v| v * v).sum()
}

/// Sketch every row of `w` in the current rayon pool. Row `i` uses an RNG
/// seeded with `cfg.seed ^ i`, so the result does not depend on scheduling.
pub fn sketch_matrix(w: &Matrix, hf: &HessianFactor, cfg: &SketchConfig) -> Result<SketchedMatrix> {
    if w.cols() != hf.dim() {
        return Err(Error::dims("sketch_matrix", w.shape(), hf.h.shape()));
    }
    cfg.validate_for(w.cols())?;
    let rows: Vec<RowSketch> = (0..w.rows())
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::for_index(cfg.seed, i as u64);
            learn_to_sketch_row(w.row(i), hf, cfg, &mut rng)
        })
        .collect::<Result<_>>()?;
    SketchedMatrix::from_row_sketches(w.cols(), cfg.gpr, cfg.bits, rows)
}

/// [`sketch_matrix`] on a dedicated pool of `threads` workers (0 = all cores).
pub fn sketch_matrix_with_threads(
    w: &Matrix,
    hf: &HessianFactor,
    cfg: &SketchConfig,
    threads: usize,
) -> Result<SketchedMatrix> {
    with_threads(threads, || sketch_matrix(w, hf, cfg))?
}
