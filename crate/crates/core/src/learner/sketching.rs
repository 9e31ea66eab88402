use super::kmeans::Assignment;
use crate::numerics::Matrix;
use crate::{Error, Result};

/// Compression operator `S` (`len × k`): `w·S` yields the sketched
/// parameters of a sub-row.
///
/// `S[i, aᵢ] = weightᵢ / Σ_{l: a_l = aᵢ} weight_l`, zero elsewhere, so each
/// column holds the normalized weights of one cluster and `w·S` is the
/// vector of weighted cluster centroids.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchingMatrix {
    s: Matrix,
    labels: Vec<usize>,
}

pub fn build_sketching_matrix(assign: &Assignment, weights: &[f64]) -> Result<SketchingMatrix> {
    let len = assign.labels.len();
    let k = assign.centers.len();
    if weights.len() != len {
        return Err(Error::invalid(format!(
            "sketching matrix: {} labels but {} weights",
            len,
            weights.len()
        )));
    }
    let mut totals = vec![0.0; k];
    for (&l, &w) in assign.labels.iter().zip(weights) {
        if l >= k {
            return Err(Error::invalid(format!("label {l} out of range for {k} centers")));
        }
        totals[l] += w;
    }
    let mut s = Matrix::zeros(len, k);
    for (i, (&l, &w)) in assign.labels.iter().zip(weights).enumerate() {
        s[(i, l)] = w / totals[l];
    }
    Ok(SketchingMatrix {
        s,
        labels: assign.labels.clone(),
    })
}

impl SketchingMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.s
    }

    pub fn k(&self) -> usize {
        self.s.cols()
    }

    /// Whether column `j` has any nonzero entry.
    pub fn is_live(&self, j: usize) -> bool {
        self.labels.contains(&j)
    }

    /// `w·S`. Each column is accumulated as an offset from its first member,
    /// which is algebraically identical (the column sums to one) and keeps a
    /// cluster of equal values exact. Empty columns give 0.
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.s.rows() {
            return Err(Error::dims("w·S", (1, w.len()), self.s.shape()));
        }
        let mut anchors: Vec<Option<f64>> = vec![None; self.k()];
        let mut out = vec![0.0; self.k()];
        for (i, (&l, &x)) in self.labels.iter().zip(w).enumerate() {
            let a = *anchors[l].get_or_insert(x);
            out[l] += self.s[(i, l)] * (x - a);
        }
        for (o, a) in out.iter_mut().zip(&anchors) {
            if let Some(a) = a {
                *o += a;
            }
        }
        Ok(out)
    }
}

/// Round-to-nearest against sorted `centers`; an exact midpoint goes to the
/// lower index.
pub fn rtn(value: f64, centers: &[f64]) -> (usize, f64) {
    assert!(!centers.is_empty(), "rtn needs at least one center");
    let j = super::kmeans::nearest(value, centers);
    (j, centers[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::kmeans::{weighted_kmeans, KMeansOptions};
    use crate::numerics::Rng;

    fn assignment(labels: Vec<usize>, centers: Vec<f64>) -> Assignment {
        Assignment {
            labels,
            centers,
            objective: 0.0,
        }
    }

    #[test]
    fn uniform_single_cluster() {
        let s = build_sketching_matrix(&assignment(vec![0, 0, 0], vec![0.0]), &[2.0, 2.0, 2.0]).unwrap();
        for i in 0..3 {
            assert!((s.matrix()[(i, 0)] - 1.0 / 3.0).abs() < 1e-16);
        }
        let c = s.apply(&[1.0, 2.0, 6.0]).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn weight_normalization() {
        let s = build_sketching_matrix(&assignment(vec![0, 0], vec![0.0]), &[3.0, 1.0]).unwrap();
        assert_eq!(s.matrix()[(0, 0)], 0.75);
        assert_eq!(s.matrix()[(1, 0)], 0.25);
        assert_eq!(s.apply(&[4.0, 8.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn reproduces_weighted_centroids() {
        let mut rng = Rng::new(31);
        for _ in 0..20 {
            let w = rng.gaussian_vec(6);
            let weights: Vec<f64> = (0..6).map(|_| 0.2 + rng.uniform()).collect();
            let a = weighted_kmeans(&w, &weights, 2, &mut rng, &KMeansOptions::default()).unwrap();
            let s = build_sketching_matrix(&a, &weights).unwrap();
            let via_s = s.apply(&w).unwrap();
            // oracle: direct per-cluster weighted mean
            for j in 0..2 {
                let (num, den) = (0..6)
                    .filter(|&i| a.labels[i] == j)
                    .fold((0.0, 0.0), |(n, d), i| (n + weights[i] * w[i], d + weights[i]));
                assert!((via_s[j] - num / den).abs() <= 1e-12);
                assert!((via_s[j] - a.centers[j]).abs() <= 1e-12);
            }
            // plain matrix-vector product agrees as well
            for j in 0..2 {
                let plain: f64 = (0..6).map(|i| w[i] * s.matrix()[(i, j)]).sum();
                assert!((plain - via_s[j]).abs() <= 1e-12);
            }
            // at most one nonzero per row
            for i in 0..6 {
                assert_eq!((0..2).filter(|&j| s.matrix()[(i, j)] != 0.0).count(), 1);
            }
        }
    }

    #[test]
    fn rtn_cases() {
        assert_eq!(rtn(0.5, &[-1.0, 0.5, 2.0]), (1, 0.5));
        assert_eq!(rtn(0.0, &[-1.0, 0.5]), (1, 0.5));
        assert_eq!(rtn(1.0, &[0.0, 2.0]), (0, 0.0));
        assert_eq!(rtn(-5.0, &[0.0, 2.0]), (0, 0.0));
        assert_eq!(rtn(5.0, &[0.0, 2.0]), (1, 2.0));
    }
}
