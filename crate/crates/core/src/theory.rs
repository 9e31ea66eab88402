//! Power-law update spectra and the sketch-vs-low-rank comparison.
//!
//! An update `Δ` (n × n) with squared singular values `ρᵢ² = i^−η` keeps
//! `Σ_{i ≤ n/2α} ρᵢ²` of its energy under the best low-rank approximation at
//! compression `α`, while a random balanced signed fold of every row keeps
//! `1/α` of it in expectation. The fold wins for `η` below
//! `η* = 1 − ln α / ln 2α` as `n` grows.

use rayon::prelude::*;

use crate::numerics::{dot, gemm_acc, matmul_nt, Matrix, Rng};
use crate::{Error, Result};

/// `(n, η, α)`: size, power-law coefficient and compression factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawSpec {
    pub n: usize,
    pub eta: f64,
    pub alpha: usize,
}

impl PowerLawSpec {
    pub fn new(n: usize, eta: f64, alpha: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("power-law size must be >= 1"));
        }
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::invalid(format!(
                "power-law coefficient must lie in [0, 1), got {eta}"
            )));
        }
        if alpha == 0 || !n.is_multiple_of(alpha) {
            return Err(Error::invalid(format!("alpha {alpha} must be >= 1 and divide n = {n}")));
        }
        Ok(Self { n, eta, alpha })
    }

    /// Singular values `ρᵢ = i^(−η/2)`, `i = 1..n`.
    pub fn spectrum(&self) -> Vec<f64> {
        spectrum(self.n, self.eta)
    }

    /// `‖Δ‖²_F = Σ i^−η`.
    pub fn energy(&self) -> f64 {
        power_sum(1, self.n, self.eta)
    }

    /// Low-rank budget `n/(2α)`.
    pub fn lowrank_rank(&self) -> usize {
        self.n / (2 * self.alpha)
    }
}

fn spectrum(n: usize, eta: f64) -> Vec<f64> {
    (1..=n).map(|i| (i as f64).powf(-eta / 2.0)).collect()
}

/// `Σ_{i=from}^{to} i^−η` with compensated summation.
pub fn power_sum(from: usize, to: usize, eta: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in from..=to {
        let term = (i as f64).powf(-eta);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Integral lower bound `L(n) = ((n+1)^{1−η} − 1)/(1−η)` on `Σ i^−η`.
pub fn power_sum_lower_bound(n: usize, eta: f64) -> f64 {
    (((n + 1) as f64).powf(1.0 - eta) - 1.0) / (1.0 - eta)
}

/// Integral upper bound `R(n) = 1 + (n^{1−η} − 1)/(1−η)` on `Σ i^−η`.
pub fn power_sum_upper_bound(n: usize, eta: f64) -> f64 {
    1.0 + ((n as f64).powf(1.0 - eta) - 1.0) / (1.0 - eta)
}

/// Squared error of the best rank-`n/(2α)` approximation: the spectrum tail
/// `Σ_{i > n/2α} i^−η`, summed directly.
pub fn lowrank_error_theory(spec: &PowerLawSpec) -> Result<f64> {
    let rank = spec.lowrank_rank();
    if rank == 0 {
        return Err(Error::invalid(format!(
            "n = {} is smaller than 2α = {}, no rank budget",
            spec.n,
            2 * spec.alpha
        )));
    }
    Ok(power_sum(rank + 1, spec.n, spec.eta))
}

/// Expected squared error of random-fold sketching: `(α−1)/α · Σ i^−η`.
pub fn sketch_error_theory(spec: &PowerLawSpec) -> f64 {
    let a = spec.alpha as f64;
    (a - 1.0) / a * spec.energy()
}

/// `η* = 1 − ln α / ln 2α`; `α = 1` gives 1.
pub fn crossover_eta(alpha: f64) -> f64 {
    1.0 - alpha.ln() / (2.0 * alpha).ln()
}

/// Balanced signed fold of `[n]` into `n/α` buckets of exactly `α` members.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomFoldSketch {
    alpha: usize,
    bucket: Vec<u32>,
    sign: Vec<f64>,
    seed: u64,
}

impl RandomFoldSketch {
    /// A random permutation of `[n]` chopped into consecutive buckets, with
    /// an independent random sign per position.
    pub fn new(n: usize, alpha: usize, seed: u64) -> Result<Self> {
        if alpha == 0 || n == 0 || !n.is_multiple_of(alpha) {
            return Err(Error::invalid(format!("alpha {alpha} must be >= 1 and divide n = {n}")));
        }
        let mut rng = Rng::new(seed);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        rng.shuffle(&mut perm);
        let mut bucket = vec![0u32; n];
        for (t, &i) in perm.iter().enumerate() {
            bucket[i as usize] = (t / alpha) as u32;
        }
        let sign = (0..n).map(|_| rng.sign()).collect();
        Ok(Self {
            alpha,
            bucket,
            sign,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.bucket.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bucket.is_empty()
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bucket_of(&self, i: usize) -> usize {
        self.bucket[i] as usize
    }

    pub fn sign_of(&self, i: usize) -> f64 {
        self.sign[i]
    }

    /// Members per bucket.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.len() / self.alpha];
        for &b in &self.bucket {
            sizes[b as usize] += 1;
        }
        sizes
    }

    /// The same fold with every sign flipped.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.sign.iter_mut().for_each(|s| *s = -*s);
        out
    }

    /// `δ̂ᵢ = gᵢ · (Σ_{j: h(j)=h(i)} gⱼ δⱼ) / α`.
    pub fn estimate(&self, delta: &[f64]) -> Vec<f64> {
        assert_eq!(delta.len(), self.len(), "fold and vector lengths differ");
        let mut sums = vec![0.0; self.len() / self.alpha];
        for ((&b, &g), &d) in self.bucket.iter().zip(&self.sign).zip(delta) {
            sums[b as usize] += g * d;
        }
        let a = self.alpha as f64;
        self.bucket
            .iter()
            .zip(&self.sign)
            .map(|(&b, &g)| g * sums[b as usize] / a)
            .collect()
    }

    /// `‖δ − δ̂‖²`.
    pub fn squared_error(&self, delta: &[f64]) -> f64 {
        self.estimate(delta)
            .iter()
            .zip(delta)
            .map(|(e, d)| (d - e) * (d - e))
            .sum()
    }
}

const PANEL: usize = 64;

/// Normalize row `r` of `rows` against rows `lo..r` of the same buffer by
/// modified Gram-Schmidt applied twice.
fn mgs_row(rows: &mut [f64], n: usize, lo: usize, r: usize) {
    let (before, rest) = rows.split_at_mut(r * n);
    let target = &mut rest[..n];
    for _ in 0..2 {
        for s in lo..r {
            let other = &before[s * n..(s + 1) * n];
            let proj = dot(target, other);
            target.iter_mut().zip(other).for_each(|(t, o)| *t -= proj * o);
        }
    }
    let norm = dot(target, target).sqrt();
    assert!(norm > 1e-8, "Gram-Schmidt breakdown at row {r}");
    target.iter_mut().for_each(|t| *t /= norm);
}

/// Haar-distributed `n × n` orthogonal matrix: block classical Gram-Schmidt
/// with reorthogonalization over panels of rows of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Matrix {
    let mut q = rng.gaussian_matrix(n, n);
    let data = q.as_mut_slice();
    let mut coef = vec![0.0; PANEL * n];
    let mut p0 = 0;
    while p0 < n {
        let p1 = (p0 + PANEL).min(n);
        let b = p1 - p0;
        let (done, rest) = data.split_at_mut(p0 * n);
        let panel = &mut rest[..b * n];
        if p0 > 0 {
            for _ in 0..2 {
                // coef = panel · doneᵀ; panel −= coef · done
                gemm_acc(b, n, p0, 1.0, panel, done, true, 0.0, &mut coef[..b * p0]);
                gemm_acc(b, p0, n, -1.0, &coef[..b * p0], done, false, 1.0, panel);
            }
        }
        for r in 0..b {
            mgs_row(panel, n, 0, r);
        }
        p0 = p1;
    }
    q
}

/// `Δ = U·diag(ρ)·Vᵀ` (`rows × cols`) with random orthonormal `U`, `V` and
/// `ρᵢ² = i^−η` for `i = 1..min(rows, cols)`.
pub fn synthesize_powerlaw(rows: usize, cols: usize, eta: f64, rng: &mut Rng) -> Matrix {
    let p = rows.min(cols);
    let rho = spectrum(p, eta);
    let u = random_orthogonal(rows, rng);
    let v = random_orthogonal(cols, rng);
    let us = Matrix::from_fn(rows, p, |i, t| u[(i, t)] * rho[t]);
    let vp = Matrix::from_fn(cols, p, |j, t| v[(j, t)]);
    matmul_nt(&us, &vp).expect("inner dimensions agree")
}

/// One Monte-Carlo trial: fixed `U`, `V` and fold seeds, evaluated at any
/// `η`. Reusing a trial across `η` gives common random numbers.
pub struct FoldTrial {
    n: usize,
    alpha: usize,
    u: Matrix,
    v: Matrix,
    fold_seed: u64,
}

impl FoldTrial {
    pub fn new(n: usize, alpha: usize, seed: u64) -> Result<Self> {
        if alpha == 0 || n == 0 || !n.is_multiple_of(alpha) {
            return Err(Error::invalid(format!("alpha {alpha} must be >= 1 and divide n = {n}")));
        }
        let mut rng = Rng::new(seed);
        let u = random_orthogonal(n, &mut rng);
        let v = random_orthogonal(n, &mut rng);
        let fold_seed = rng.next_u64();
        Ok(Self {
            n,
            alpha,
            u,
            v,
            fold_seed,
        })
    }

    pub fn delta(&self, eta: f64) -> Matrix {
        let rho = spectrum(self.n, eta);
        let mut us = self.u.clone();
        for i in 0..self.n {
            us.row_mut(i).iter_mut().zip(&rho).for_each(|(x, r)| *x *= r);
        }
        matmul_nt(&us, &self.v).expect("square factors")
    }

    /// The fold applied to row `i`.
    pub fn fold(&self, row: usize) -> RandomFoldSketch {
        RandomFoldSketch::new(self.n, self.alpha, self.fold_seed ^ row as u64).expect("validated in new")
    }

    /// `‖Δ − Δ_s‖²_F` with an independent fold per row.
    pub fn sketch_error(&self, eta: f64) -> f64 {
        let delta = self.delta(eta);
        let per_row: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| self.fold(i).squared_error(delta.row(i)))
            .collect();
        per_row.iter().sum()
    }
}

/// Monte-Carlo summary at one `η`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FoldStats {
    pub eta: f64,
    /// Exact spectrum-tail low-rank error (`NaN` when `n < 2α`).
    pub lowrank_exact: f64,
    pub sketch_closed_form: f64,
    pub sketch_mean: f64,
    /// Sample standard deviation over trials (0 for a single trial).
    pub sketch_std: f64,
    pub trials: usize,
}

/// Evaluate `trials` random-fold trials at every `η` in `etas`. Trial `t`
/// is seeded with `seed ^ t`; each trial is reused across the grid.
pub fn fold_sweep(n: usize, alpha: usize, etas: &[f64], trials: usize, seed: u64) -> Result<Vec<FoldStats>> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let specs: Vec<PowerLawSpec> = etas
        .iter()
        .map(|&e| PowerLawSpec::new(n, e, alpha))
        .collect::<Result<_>>()?;
    let errors: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial = FoldTrial::new(n, alpha, seed ^ t as u64)?;
            Ok(etas.iter().map(|&e| trial.sketch_error(e)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(specs
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let samples: Vec<f64> = errors.iter().map(|row| row[k]).collect();
            let mean = samples.iter().sum::<f64>() / trials as f64;
            let std = if trials > 1 {
                (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt()
            } else {
                0.0
            };
            FoldStats {
                eta: spec.eta,
                lowrank_exact: lowrank_error_theory(spec).unwrap_or(f64::NAN),
                sketch_closed_form: sketch_error_theory(spec),
                sketch_mean: mean,
                sketch_std: std,
                trials,
            }
        })
        .collect())
}

/// Monte-Carlo estimate of the random-fold error for one spec.
pub fn monte_carlo_fold(spec: &PowerLawSpec, trials: usize, seed: u64) -> Result<FoldStats> {
    Ok(fold_sweep(spec.n, spec.alpha, &[spec.eta], trials, seed)?[0])
}

/// `η` at which the mean empirical fold error meets the exact low-rank error,
/// found by bisection on `[lo, hi]` down to width `tol`.
pub fn empirical_crossover(
    n: usize,
    alpha: usize,
    trials: usize,
    seed: u64,
    (lo, hi): (f64, f64),
    tol: f64,
) -> Result<f64> {
    if trials == 0 || !(tol > 0.0) {
        return Err(Error::invalid("need at least one trial and a positive tolerance"));
    }
    PowerLawSpec::new(n, lo, alpha)?;
    PowerLawSpec::new(n, hi, alpha)?;
    let set: Vec<FoldTrial> = (0..trials)
        .into_par_iter()
        .map(|t| FoldTrial::new(n, alpha, seed ^ t as u64))
        .collect::<Result<_>>()?;
    let gap = |eta: f64| -> Result<f64> {
        let spec = PowerLawSpec::new(n, eta, alpha)?;
        let mean = set.iter().map(|t| t.sketch_error(eta)).sum::<f64>() / trials as f64;
        Ok(mean - lowrank_error_theory(&spec)?)
    };
    let (mut lo, mut hi) = (lo, hi);
    if gap(lo)? >= 0.0 || gap(hi)? <= 0.0 {
        return Err(Error::invalid(format!(
            "errors do not cross on [{lo}, {hi}] for n = {n}, alpha = {alpha}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{matmul_tn, singular_values};

    fn direct_sum(from: usize, to: usize, eta: f64) -> f64 {
        (from..=to).rev().map(|i| (i as f64).powf(-eta)).sum()
    }

    #[test]
    fn flat_spectrum() {
        let spec = PowerLawSpec::new(1024, 0.0, 8).unwrap();
        assert_eq!(lowrank_error_theory(&spec).unwrap(), 960.0);
        assert_eq!(sketch_error_theory(&spec), 896.0);
    }

    #[test]
    fn near_one_coefficient() {
        let spec = PowerLawSpec::new(1024, 0.999, 8).unwrap();
        let expected = direct_sum(1, 1024, 0.999) - direct_sum(1, 64, 0.999);
        assert!((lowrank_error_theory(&spec).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn single_retained_value() {
        let spec = PowerLawSpec::new(16, 0.4, 8).unwrap();
        assert!((lowrank_error_theory(&spec).unwrap() - (spec.energy() - 1.0)).abs() < 1e-12);
        let too_small = PowerLawSpec::new(8, 0.4, 8).unwrap();
        assert!(lowrank_error_theory(&too_small).is_err());
    }

    #[test]
    fn sketch_closed_forms() {
        let none = PowerLawSpec::new(64, 0.3, 1).unwrap();
        assert_eq!(sketch_error_theory(&none), 0.0);
        let spec = PowerLawSpec::new(256, 0.5, 4).unwrap();
        assert!((sketch_error_theory(&spec) - 0.75 * direct_sum(1, 256, 0.5)).abs() < 1e-10);
    }

    #[test]
    fn crossover_values() {
        assert!((crossover_eta(8.0) - 0.25).abs() < 1e-12);
        assert!((crossover_eta(2.0) - 0.5).abs() < 1e-12);
        assert_eq!(crossover_eta(1.0), 1.0);
    }

    #[test]
    fn ordering_flips_at_crossover() {
        for alpha in [2usize, 4, 8] {
            let star = crossover_eta(alpha as f64);
            for step in 0..20 {
                let eta = step as f64 * 0.05;
                if (eta - star).abs() <= 0.05 {
                    continue;
                }
                let spec = PowerLawSpec::new(4096, eta, alpha).unwrap();
                let sketch_wins = sketch_error_theory(&spec) < lowrank_error_theory(&spec).unwrap();
                assert_eq!(sketch_wins, eta < star, "alpha {alpha}, eta {eta}");
            }
        }
    }

    #[test]
    fn integral_envelope() {
        for n in [10usize, 256, 4096] {
            assert_eq!(power_sum(1, n, 0.0), n as f64);
            for step in 1..20 {
                let eta = step as f64 * 0.05;
                let s = power_sum(1, n, eta);
                assert!(power_sum_lower_bound(n, eta) < s && s < power_sum_upper_bound(n, eta));
            }
        }
    }

    #[test]
    fn folds_are_balanced() {
        let f = RandomFoldSketch::new(24, 4, 3).unwrap();
        assert!(f.bucket_sizes().iter().all(|&s| s == 4));
        assert_eq!(f.bucket_sizes().len(), 6);
        assert!(RandomFoldSketch::new(10, 4, 0).is_err());
    }

    #[test]
    fn identity_fold_is_exact() {
        let mut rng = Rng::new(4);
        let d = rng.gaussian_vec(32);
        let f = RandomFoldSketch::new(32, 1, 9).unwrap();
        assert_eq!(f.estimate(&d), d);
        assert_eq!(f.squared_error(&d), 0.0);
        let stats = monte_carlo_fold(&PowerLawSpec::new(32, 0.2, 1).unwrap(), 3, 1).unwrap();
        assert_eq!(stats.sketch_mean, 0.0);
    }

    #[test]
    fn negated_signs_give_identical_errors() {
        let mut rng = Rng::new(5);
        for seed in 0..20 {
            let d = rng.gaussian_vec(64);
            let f = RandomFoldSketch::new(64, 4, seed).unwrap();
            assert_eq!(f.squared_error(&d), f.negated().squared_error(&d));
        }
    }

    #[test]
    fn orthogonal_factors() {
        let mut rng = Rng::new(6);
        for n in [5, 64, 130] {
            let q = random_orthogonal(n, &mut rng);
            let g = matmul_tn(&q, &q).unwrap();
            assert!(g.sub(&Matrix::identity(n)).unwrap().max_abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn synthesized_energy_and_spectrum() {
        let mut rng = Rng::new(7);
        for eta in [0.0, 0.3, 0.9] {
            let d = synthesize_powerlaw(40, 40, eta, &mut rng);
            assert!((d.frobenius_norm_sq() - power_sum(1, 40, eta)).abs() < 1e-8);
            let s = singular_values(&d);
            for (i, sv) in s.iter().enumerate() {
                assert!((sv - ((i + 1) as f64).powf(-eta / 2.0)).abs() < 1e-8);
            }
        }
        let t = FoldTrial::new(48, 4, 2).unwrap();
        assert!((t.delta(0.5).frobenius_norm_sq() - power_sum(1, 48, 0.5)).abs() < 1e-8);
    }

    #[test]
    fn estimator_is_unbiased() {
        let spec = PowerLawSpec::new(64, 0.3, 4).unwrap();
        let stats = monte_carlo_fold(&spec, 200, 11).unwrap();
        let se = stats.sketch_std / (stats.trials as f64).sqrt();
        assert!(
            (stats.sketch_mean - stats.sketch_closed_form).abs() <= 3.0 * se,
            "mean {} closed {} se {se}",
            stats.sketch_mean,
            stats.sketch_closed_form
        );
    }

    #[test]
    fn sweep_is_deterministic() {
        let a = fold_sweep(32, 4, &[0.0, 0.5], 3, 17).unwrap();
        let b = fold_sweep(32, 4, &[0.0, 0.5], 3, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].lowrank_exact, 28.0);
    }
}
