//! Layer-input statistics for sketch learning.
//!
//! The layer-wise reconstruction objective `‖wX − ŵX‖²` has Hessian
//! `H = 2XXᵀ` with respect to a weight row. The learner needs its (dampened)
//! inverse, the diagonal of that inverse, and the upper Cholesky factor of
//! the inverse.

use crate::numerics::{cholesky, matmul_nt, spd_inverse, Matrix, Rng};
use crate::{Error, Result};

/// Default relative dampening `λ` in `H + λ·mean(diag H)·I`.
pub const DEFAULT_DAMP: f64 = 0.01;

/// Calibration inputs: `c` feature rows by `m` sample columns.
#[derive(Clone, Debug)]
pub struct CalibrationSet {
    x: Matrix,
}

impl CalibrationSet {
    pub fn new(x: Matrix) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite("calibration set"));
        }
        Ok(Self { x })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    /// Input feature dimension `c`.
    pub fn dim(&self) -> usize {
        self.x.rows()
    }

    pub fn samples(&self) -> usize {
        self.x.cols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibDistribution {
    Gaussian,
    /// Gaussian with 5% of the sample columns scaled by 10.
    HeavyTail,
}

/// Synthetic calibration set, deterministic in the RNG state.
pub fn synth_calibration(c: usize, m: usize, rng: &mut Rng, dist: CalibDistribution) -> CalibrationSet {
    assert!(
        c >= 1 && m >= 1,
        "calibration needs at least one feature and one sample"
    );
    let mut x = rng.gaussian_matrix(c, m);
    if dist == CalibDistribution::HeavyTail {
        let n_outliers = ((m as f64) * 0.05).ceil() as usize;
        let mut cols: Vec<usize> = (0..m).collect();
        rng.shuffle(&mut cols);
        for &j in &cols[..n_outliers] {
            for i in 0..c {
                x[(i, j)] *= 10.0;
            }
        }
    }
    CalibrationSet { x }
}

/// Hessian of the layer objective together with the factors the learner
/// reads. Immutable once built.
#[derive(Clone, Debug)]
pub struct HessianFactor {
    pub h: Matrix,
    pub h_inv: Matrix,
    /// Upper Cholesky factor `U` of `h_inv` (`UᵀU = h_inv`).
    pub chol_upper: Matrix,
    pub damp_lambda: f64,
    /// Diagonal of `h_inv`.
    pub inv_diag: Vec<f64>,
}

impl HessianFactor {
    pub fn dim(&self) -> usize {
        self.h.rows()
    }
}

/// `H = 2XXᵀ + damp·mean(diag(2XXᵀ))·I`, its inverse and the upper Cholesky
/// factor of the inverse.
pub fn build_hessian(cal: &CalibrationSet, damp: f64) -> Result<HessianFactor> {
    if !(damp >= 0.0) || !damp.is_finite() {
        return Err(Error::invalid(format!("dampening must be finite and >= 0, got {damp}")));
    }
    let mut h = matmul_nt(cal.x(), cal.x())?.scaled(2.0);
    let c = h.rows();
    let mean_diag = h.diag().iter().sum::<f64>() / c as f64;
    let shift = damp * mean_diag;
    for i in 0..c {
        h[(i, i)] += shift;
    }
    let h = h.symmetrized();
    let h_inv = spd_inverse(&h).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularHessian,
        other => other,
    })?;
    let chol_upper = cholesky(&h_inv, true).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularHessian,
        other => other,
    })?;
    let inv_diag = h_inv.diag();
    if inv_diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::SingularHessian);
    }
    Ok(HessianFactor {
        h,
        h_inv,
        chol_upper,
        damp_lambda: damp,
        inv_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{matmul, matmul_tn};

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn identity_calibration() {
        let cal = CalibrationSet::new(Matrix::identity(2)).unwrap();
        let hf = build_hessian(&cal, 0.0).unwrap();
        assert_eq!(hf.h, Matrix::identity(2).scaled(2.0));
        assert!(close(&hf.h_inv, &Matrix::identity(2).scaled(0.5), 1e-15));
        assert_eq!(hf.inv_diag, vec![0.5, 0.5]);
    }

    #[test]
    fn orthogonal_rows() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0]]);
        // oracle: direct 2XXᵀ
        let direct = matmul(&x, &x.transpose()).unwrap().scaled(2.0);
        let hf = build_hessian(&CalibrationSet::new(x).unwrap(), 0.0).unwrap();
        assert_eq!(hf.h, direct);
        assert_eq!(hf.h, Matrix::from_rows(&[[4.0, 0.0], [0.0, 4.0]]));
        assert!(close(&hf.h_inv, &Matrix::identity(2).scaled(0.25), 1e-15));
    }

    #[test]
    fn zero_row_needs_dampening() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 3.0], [0.0, 0.0, 0.0], [1.0, -1.0, 0.5]]);
        let cal = CalibrationSet::new(x).unwrap();
        assert!(matches!(build_hessian(&cal, 0.0), Err(Error::SingularHessian)));
        let hf = build_hessian(&cal, 0.01).unwrap();
        assert!(hf.inv_diag.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn factor_invariants() {
        let mut rng = Rng::new(4);
        let cal = synth_calibration(12, 40, &mut rng, CalibDistribution::Gaussian);
        let hf = build_hessian(&cal, DEFAULT_DAMP).unwrap();
        assert_eq!(hf.h, hf.h.transpose());
        let back = matmul_tn(&hf.chol_upper, &hf.chol_upper).unwrap();
        let rel = back.sub(&hf.h_inv).unwrap().frobenius_norm() / hf.h_inv.frobenius_norm();
        assert!(rel < 1e-8);
        for i in 0..12 {
            for j in 0..i {
                assert_eq!(hf.chol_upper[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rank_deficient_with_dampening_succeeds() {
        let mut rng = Rng::new(8);
        // m < c: 2XXᵀ is singular
        let cal = synth_calibration(16, 4, &mut rng, CalibDistribution::Gaussian);
        assert!(build_hessian(&cal, 0.0).is_err());
        let hf = build_hessian(&cal, 0.01).unwrap();
        assert!(hf.inv_diag.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn scaling_inputs_scales_hessian() {
        let mut rng = Rng::new(6);
        let cal = synth_calibration(6, 30, &mut rng, CalibDistribution::Gaussian);
        let gamma = 3.0;
        let scaled = CalibrationSet::new(cal.x().scaled(gamma)).unwrap();
        let a = build_hessian(&cal, 0.01).unwrap();
        let b = build_hessian(&scaled, 0.01).unwrap();
        let rel_h = b.h.sub(&a.h.scaled(gamma * gamma)).unwrap().max_abs() / b.h.max_abs();
        let rel_inv = b.h_inv.sub(&a.h_inv.scaled(1.0 / (gamma * gamma))).unwrap().max_abs() / b.h_inv.max_abs();
        assert!(rel_h < 1e-13 && rel_inv < 1e-10, "{rel_h} {rel_inv}");
    }

    #[test]
    fn identity_inputs_have_diagonal_factor() {
        let cal = CalibrationSet::new(Matrix::identity(5)).unwrap();
        let hf = build_hessian(&cal, DEFAULT_DAMP).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(hf.chol_upper[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = synth_calibration(4, 8, &mut Rng::new(7), CalibDistribution::Gaussian);
        let b = synth_calibration(4, 8, &mut Rng::new(7), CalibDistribution::Gaussian);
        assert_eq!(a.x(), b.x());
    }

    #[test]
    fn gaussian_covariance_is_near_identity() {
        let m = 100_000;
        let cal = synth_calibration(4, m, &mut Rng::new(10), CalibDistribution::Gaussian);
        let cov = matmul_nt(cal.x(), cal.x()).unwrap().scaled(1.0 / m as f64);
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() < 0.05, "cov[{i},{j}] = {}", cov[(i, j)]);
            }
        }
    }

    #[test]
    fn heavy_tail_has_outlier_columns() {
        let cal = synth_calibration(8, 200, &mut Rng::new(12), CalibDistribution::HeavyTail);
        let mut norms: Vec<f64> = (0..200)
            .map(|j| (0..8).map(|i| cal.x()[(i, j)].powi(2)).sum::<f64>().sqrt())
            .collect();
        norms.sort_by(f64::total_cmp);
        let ratio = norms[199] / norms[100];
        assert!(ratio >= 5.0, "ratio {ratio}");
    }
}
