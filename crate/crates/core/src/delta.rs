//! How well can a weight update `Δ = W′ − W` be represented?
//!
//! Two subspaces are compared at equal parameter budgets: the best rank-`r`
//! approximation, and the best approximation that is constant on every
//! cluster of a fixed sketch mapping (the update a sketch can realize by
//! moving its sketched parameters).

use std::io::Write;

use crate::calibration::HessianFactor;
use crate::learner::{sketch_matrix, SketchConfig};
use crate::numerics::{truncated_svd, Matrix};
use crate::runtime::SketchedMatrix;
use crate::{Error, Result};

fn norm_or_err(delta: &Matrix) -> Result<f64> {
    let n = delta.frobenius_norm();
    if n == 0.0 {
        Err(Error::UndefinedNormalization)
    } else {
        Ok(n)
    }
}

/// `‖Δ − SVD_rank(Δ)‖_F / ‖Δ‖_F`.
pub fn lowrank_delta_error(delta: &Matrix, rank: usize) -> Result<f64> {
    let norm = norm_or_err(delta)?;
    let approx = truncated_svd(delta, rank)?.reconstruct(rank);
    Ok(delta.sub(&approx)?.frobenius_norm() / norm)
}

/// Orthogonal projection of `Δ` onto the matrices that are constant on each
/// (row, group, index) cluster of the mapping: every entry is replaced by
/// its cluster mean.
pub fn project_onto_mapping(delta: &Matrix, sm: &SketchedMatrix) -> Result<Matrix> {
    if delta.shape() != sm.shape() {
        return Err(Error::dims("project_onto_mapping", delta.shape(), sm.shape()));
    }
    let k = sm.k();
    let slots = sm.gpr() * k;
    let glen = sm.group_len();
    let mut out = Matrix::zeros(sm.rows(), sm.cols());
    let mut sums = vec![0.0; slots];
    let mut counts = vec![0usize; slots];
    for i in 0..sm.rows() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        let idx = sm.indices_row(i);
        for (j, (&m, &d)) in idx.iter().zip(delta.row(i)).enumerate() {
            let slot = (j / glen) * k + m as usize;
            sums[slot] += d;
            counts[slot] += 1;
        }
        for (j, (o, &m)) in out.row_mut(i).iter_mut().zip(idx).enumerate() {
            let slot = (j / glen) * k + m as usize;
            *o = sums[slot] / counts[slot] as f64;
        }
    }
    Ok(out)
}

/// `‖Δ − P(Δ)‖_F / ‖Δ‖_F` with `P` the projection onto the mapping.
pub fn sketch_delta_error(delta: &Matrix, sm: &SketchedMatrix) -> Result<f64> {
    let norm = norm_or_err(delta)?;
    let proj = project_onto_mapping(delta, sm)?;
    Ok(delta.sub(&proj)?.frobenius_norm() / norm)
}

/// Low-rank rank at compression `alpha`: `⌊(r·c/α)/(r + c)⌋`.
pub fn lowrank_rank_for(rows: usize, cols: usize, alpha: f64) -> usize {
    ((rows * cols) as f64 / alpha / (rows + cols) as f64).floor() as usize
}

/// Float-equivalent cost of a sketch: `r·gpr·k + r·c·bits/32`.
pub fn sketch_budget(rows: usize, cols: usize, gpr: usize, bits: u8) -> f64 {
    (rows * gpr * (1usize << bits)) as f64 + (rows * cols * bits as usize) as f64 / 32.0
}

/// `(gpr, bits)` whose cost is closest to `r·c/α`. Ties prefer more
/// centers per row, then fewer bits. `None` if no configuration fits the
/// column count.
pub fn sketch_config_for(rows: usize, cols: usize, alpha: f64) -> Option<(usize, u8)> {
    let target = (rows * cols) as f64 / alpha;
    let mut best: Option<(f64, usize, u8)> = None;
    for bits in 2u8..=4 {
        let k = 1usize << bits;
        for gpr in (1..=cols).filter(|g| cols.is_multiple_of(*g) && k <= cols / g) {
            let gap = (sketch_budget(rows, cols, gpr, bits) - target).abs();
            let better = match best {
                None => true,
                Some((bg, bgpr, bbits)) => {
                    let (centers, bcenters) = (gpr << bits, bgpr << bbits);
                    gap < bg || (gap == bg && (centers > bcenters || (centers == bcenters && bits < bbits)))
                }
            };
            if better {
                best = Some((gap, gpr, bits));
            }
        }
    }
    best.map(|(_, g, b)| (g, b))
}

/// Errors of both subspaces across compression ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaReport {
    pub matrix_id: String,
    pub compression_ratios: Vec<f64>,
    pub lowrank_err: Vec<f64>,
    pub sketch_err: Vec<f64>,
    /// Rank used at each ratio.
    pub ranks: Vec<usize>,
    /// `(gpr, bits)` used at each ratio.
    pub sketch_configs: Vec<(usize, u8)>,
}

impl DeltaReport {
    /// CSV with `ratio,lowrank_err,sketch_err` rows, preceded by `#` lines
    /// giving the accounting formulas and per-ratio choices.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# matrix: {}", self.matrix_id)?;
        writeln!(
            out,
            "# lowrank params = rank*(rows+cols), rank = floor((rows*cols/ratio)/(rows+cols))"
        )?;
        writeln!(out, "# sketch params = rows*gpr*2^bits + rows*cols*bits/32")?;
        for ((a, r), (g, b)) in self
            .compression_ratios
            .iter()
            .zip(&self.ranks)
            .zip(&self.sketch_configs)
        {
            writeln!(out, "# ratio {a}: rank {r}, gpr {g}, bits {b}")?;
        }
        writeln!(out, "ratio,lowrank_err,sketch_err")?;
        for ((a, l), s) in self
            .compression_ratios
            .iter()
            .zip(&self.lowrank_err)
            .zip(&self.sketch_err)
        {
            writeln!(out, "{a},{l},{s}")?;
        }
        Ok(())
    }
}

/// Sweep compression ratios for `Δ = w_prime − w`. The mapping at each ratio
/// comes from sketching `w` (not `Δ`) with `hf`; `base` supplies every
/// sketching setting except `gpr` and `bits`. A ratio whose rank budget is
/// zero reports a low-rank error of 1.
pub fn compare_sweep(
    w: &Matrix,
    w_prime: &Matrix,
    hf: &HessianFactor,
    ratios: &[f64],
    base: &SketchConfig,
    matrix_id: &str,
) -> Result<DeltaReport> {
    if ratios.is_empty() {
        return Err(Error::invalid("empty compression ratio list"));
    }
    if let Some(bad) = ratios.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid(format!(
            "compression ratio must be finite and > 0, got {bad}"
        )));
    }
    let delta = w_prime.sub(w)?;
    norm_or_err(&delta)?;
    let (r, c) = delta.shape();
    let mut report = DeltaReport {
        matrix_id: matrix_id.to_string(),
        compression_ratios: ratios.to_vec(),
        lowrank_err: Vec::with_capacity(ratios.len()),
        sketch_err: Vec::with_capacity(ratios.len()),
        ranks: Vec::with_capacity(ratios.len()),
        sketch_configs: Vec::with_capacity(ratios.len()),
    };
    for &alpha in ratios {
        let rank = lowrank_rank_for(r, c, alpha).min(r.min(c));
        let lr = if rank == 0 {
            1.0
        } else {
            lowrank_delta_error(&delta, rank)?
        };
        let (gpr, bits) = sketch_config_for(r, c, alpha)
            .ok_or_else(|| Error::invalid(format!("no sketch configuration fits {c} columns")))?;
        let cfg = SketchConfig { gpr, bits, ..*base };
        let sm = sketch_matrix(w, hf, &cfg)?;
        report.lowrank_err.push(lr);
        report.sketch_err.push(sketch_delta_error(&delta, &sm)?);
        report.ranks.push(rank);
        report.sketch_configs.push((gpr, bits));
    }
    Ok(report)
}
