//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of the working matrix are rotated pairwise until they are mutually
//! orthogonal; their norms are then the singular values. Accurate to working
//! precision and simple, at the cost of `O(n³)` per sweep.

use super::matrix::{dot, Matrix};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U·diag(σ)·Vᵀ`, singular values sorted descending.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `m × p` with orthonormal columns, `p = min(m, n)`.
    pub u: Matrix,
    pub sigma: Vec<f64>,
    /// `n × p` with orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    /// `U·diag(σ)·Vᵀ` using the leading `rank` triplets.
    pub fn reconstruct(&self, rank: usize) -> Matrix {
        let rank = rank.min(self.sigma.len());
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let row = out.row_mut(i);
            for t in 0..rank {
                let coef = self.u[(i, t)] * self.sigma[t];
                if coef == 0.0 {
                    continue;
                }
                for (j, r) in row.iter_mut().enumerate() {
                    *r += coef * self.v[(j, t)];
                }
            }
        }
        out
    }
}

/// Jacobi on the rows of `w` (each row is one column of the matrix being
/// decomposed). `vt` accumulates the same rotations.
fn jacobi_rows(w: &mut [Vec<f64>], vt: &mut [Vec<f64>]) {
    let p = w.len();
    let tol = f64::EPSILON * (w.first().map_or(1, Vec::len) as f64).max(1.0);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for a in 0..p {
            for b in a + 1..p {
                let (left, right) = w.split_at_mut(b);
                let (wa, wb) = (&mut left[a], &mut right[0]);
                let alpha = dot(wa, wa);
                let beta = dot(wb, wb);
                let gamma = dot(wa, wb);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wa, wb, c, s);
                let (vl, vr) = vt.split_at_mut(b);
                rotate(&mut vl[a], &mut vr[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Extend `cols` (orthonormal vectors of length `dim`) so that the entries
/// flagged in `missing` become unit vectors orthogonal to all others.
fn complete_basis(cols: &mut [Vec<f64>], missing: &[bool]) {
    let dim = cols.first().map_or(0, Vec::len);
    let mut next_axis = 0;
    for t in 0..cols.len() {
        if !missing[t] {
            continue;
        }
        loop {
            assert!(next_axis < dim, "basis completion ran out of axes");
            let mut cand = vec![0.0; dim];
            cand[next_axis] = 1.0;
            next_axis += 1;
            for _ in 0..2 {
                for (o, other) in cols.iter().enumerate() {
                    if o == t || (missing[o] && o > t) {
                        continue;
                    }
                    let proj = dot(&cand, other);
                    for (ci, oi) in cand.iter_mut().zip(other) {
                        *ci -= proj * oi;
                    }
                }
            }
            let norm = dot(&cand, &cand).sqrt();
            if norm > 1e-6 {
                cand.iter_mut().for_each(|v| *v /= norm);
                cols[t] = cand;
                break;
            }
        }
    }
}

/// Full thin SVD of `a`.
pub fn svd(a: &Matrix) -> Svd {
    let transposed = a.rows() < a.cols();
    let work = if transposed { a.transpose() } else { a.clone() };
    // `work` is m×n with m ≥ n; rotate its columns.
    let (m, n) = work.shape();
    let wt = work.transpose();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| wt.row(j).to_vec()).collect();
    let mut vt: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    jacobi_rows(&mut cols, &mut vt);

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));

    let scale = norms.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let cutoff = scale * f64::EPSILON * (m as f64);
    let mut sigma = Vec::with_capacity(n);
    let mut u_cols = Vec::with_capacity(n);
    let mut v_cols = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    for &j in &order {
        let s = norms[j];
        if s > cutoff {
            sigma.push(s);
            u_cols.push(cols[j].iter().map(|x| x / s).collect::<Vec<_>>());
            missing.push(false);
        } else {
            sigma.push(0.0);
            u_cols.push(vec![0.0; m]);
            missing.push(true);
        }
        v_cols.push(vt[j].clone());
    }
    if missing.iter().any(|&x| x) {
        complete_basis(&mut u_cols, &missing);
    }

    let u = Matrix::from_fn(m, n, |i, t| u_cols[t][i]);
    let v = Matrix::from_fn(n, n, |i, t| v_cols[t][i]);
    if transposed {
        Svd { u: v, sigma, v: u }
    } else {
        Svd { u, sigma, v }
    }
}

/// Singular values only, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    svd(a).sigma
}

/// Leading `rank` singular triplets; `U·diag(σ)·Vᵀ` is the best rank-`rank`
/// approximation in Frobenius norm.
pub fn truncated_svd(a: &Matrix, rank: usize) -> Result<Svd> {
    let max = a.rows().min(a.cols());
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { rank, max });
    }
    let full = svd(a);
    let keep = |m: &Matrix| Matrix::from_fn(m.rows(), rank, |i, j| m[(i, j)]);
    Ok(Svd {
        u: keep(&full.u),
        sigma: full.sigma[..rank].to_vec(),
        v: keep(&full.v),
    })
}
