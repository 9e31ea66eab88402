use super::matrix::{dot, matmul_tn, Matrix};
use crate::{Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

fn check_symmetric(a: &Matrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::dims("cholesky", a.shape(), a.shape()));
    }
    let n = a.rows();
    let scale = a.max_abs();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    let asymmetry = if scale > 0.0 { worst / scale } else { 0.0 };
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Lower factor `L` with `L·Lᵀ = (A + Aᵀ)/2`.
fn cholesky_lower(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let a = a.symmetrized();
    let n = a.rows();
    let max_diag = a.diag().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    // Pivots below this are indistinguishable from zero at double precision.
    let floor = f64::EPSILON * n as f64 * max_diag;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                if !(s > floor) {
                    return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// The input is symmetrized first; asymmetry above [`SYMMETRY_TOL`] (relative
/// to the largest entry) is an error. Returns `U` with `UᵀU = A` when `upper`
/// is set, otherwise `L` with `LLᵀ = A`.
pub fn cholesky(a: &Matrix, upper: bool) -> Result<Matrix> {
    let l = cholesky_lower(a)?;
    Ok(if upper { l.transpose() } else { l })
}

/// `A = L·D·Lᵀ` with unit lower-triangular `L`. Square-root free, so a
/// diagonal `A` round-trips exactly.
fn ldl(a: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    check_symmetric(a)?;
    let a = a.symmetrized();
    let n = a.rows();
    let max_diag = a.diag().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let floor = f64::EPSILON * n as f64 * max_diag;
    let mut l = Matrix::identity(n);
    let mut d = vec![0.0; n];
    // scratch holds L[j, k]·d[k] for the current column j
    let mut ld = vec![0.0; n];
    for j in 0..n {
        for k in 0..j {
            ld[k] = l[(j, k)] * d[k];
        }
        let dj = a[(j, j)] - dot(&l.row(j)[..j], &ld[..j]);
        if !(dj > floor) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: dj });
        }
        d[j] = dj;
        for i in j + 1..n {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &ld[..j]);
            l[(i, j)] = s / dj;
        }
    }
    Ok((l, d))
}

/// Inverse of a unit lower-triangular matrix by forward substitution.
fn unit_lower_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    // column j of L⁻¹ is computed into row j of `inv_t`, so the inner loops
    // read contiguous rows
    let mut inv_t = Matrix::zeros(n, n);
    for j in 0..n {
        let row = inv_t.row_mut(j);
        row[j] = 1.0;
        for i in j + 1..n {
            row[i] = -dot(&l.row(i)[j..i], &row[j..i]);
        }
    }
    inv_t.transpose()
}

/// Inverse of a symmetric positive definite matrix, `A⁻¹ = L⁻ᵀ·D⁻¹·L⁻¹`
/// from the `LDLᵀ` factorization.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let (l, d) = ldl(a)?;
    let l_inv = unit_lower_inverse(&l);
    let mut scaled = l_inv.clone();
    for (i, di) in d.iter().enumerate() {
        scaled.row_mut(i).iter_mut().for_each(|x| *x /= di);
    }
    let inv = matmul_tn(&l_inv, &scaled)?;
    Ok(inv.symmetrized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{matmul, Rng};

    fn random_spd(rng: &mut Rng, n: usize) -> Matrix {
        let b = rng.gaussian_matrix(n, n);
        matmul_tn(&b, &b).unwrap().add(&Matrix::identity(n)).unwrap()
    }

    #[test]
    fn diagonal_case() {
        let a = Matrix::identity(3).scaled(4.0);
        assert_eq!(cholesky(&a, true).unwrap(), Matrix::identity(3).scaled(2.0));
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]);
        let u = cholesky(&a, true).unwrap();
        assert_eq!(u[(0, 0)], 2.0);
        assert_eq!(u[(0, 1)], 1.0);
        assert_eq!(u[(1, 0)], 0.0);
        assert!((u[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_up_to_64() {
        let mut rng = Rng::new(5);
        for n in [1, 2, 8, 17, 33, 64] {
            let a = random_spd(&mut rng, n);
            let u = cholesky(&a, true).unwrap();
            let back = matmul_tn(&u, &u).unwrap();
            let rel = back.sub(&a).unwrap().frobenius_norm() / a.frobenius_norm();
            assert!(rel < 1e-9, "n={n} rel={rel}");
            let l = cholesky(&a, false).unwrap();
            assert_eq!(l, u.transpose());
        }
    }

    #[test]
    fn non_positive_pivot_is_reported() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        match cholesky(&a, true) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
        let zero_row = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(
            cholesky(&zero_row, false),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn asymmetry_is_rejected() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [0.0, 2.0]]);
        assert!(matches!(cholesky(&a, true), Err(Error::NotSymmetric { .. })));
        // accumulation-order noise is tolerated
        let b = Matrix::from_rows(&[[2.0, 1.0], [1.0 + 1e-14, 2.0]]);
        assert!(cholesky(&b, true).is_ok());
    }

    #[test]
    fn inverse_closed_forms() {
        let inv = spd_inverse(&Matrix::identity(4).scaled(2.0)).unwrap();
        assert_eq!(inv, Matrix::identity(4).scaled(0.5));

        let inv = spd_inverse(&Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        let expected = Matrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).scaled(1.0 / 3.0);
        for (x, y) in inv.as_slice().iter().zip(expected.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_residual() {
        let mut rng = Rng::new(9);
        for n in [3, 6, 20] {
            let a = random_spd(&mut rng, n);
            let inv = spd_inverse(&a).unwrap();
            let prod = matmul(&a, &inv).unwrap();
            let rel = prod.sub(&Matrix::identity(n)).unwrap().frobenius_norm() / (n as f64).sqrt();
            assert!(rel < 1e-8, "n={n} rel={rel}");
        }
    }
}
