//! Weighted 1-D k-means.
//!
//! Lloyd iterations on `Σ wᵢ (c[aᵢ] − xᵢ)²`. The default initialization is the
//! exact optimum over contiguous partitions of the sorted values (1-D
//! optimal clusters are always contiguous), computed by dynamic programming
//! with divide-and-conquer row minimization in `O(k·n·log n)`. Weighted
//! k-means++ seeding is available as the alternative.

use crate::numerics::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KMeansInit {
    /// Exact optimal contiguous partition.
    #[default]
    Optimal,
    /// Weighted k-means++ seeding from the supplied RNG.
    PlusPlus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansOptions {
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls to this value.
    pub tol: f64,
    pub init: KMeansInit,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-8,
            init: KMeansInit::Optimal,
        }
    }
}

/// Cluster labels and centers. Centers are sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub centers: Vec<f64>,
    pub objective: f64,
}

/// `Σ wᵢ (centers[labels[i]] − xᵢ)²`
pub fn weighted_objective(values: &[f64], weights: &[f64], labels: &[usize], centers: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .zip(labels)
        .map(|((&x, &w), &l)| {
            let d = centers[l] - x;
            w * d * d
        })
        .sum()
}

/// Weighted mean computed as an offset from the first member, so a cluster of
/// identical values returns that value exactly.
pub(crate) fn weighted_centroid(members: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let mut anchor = None;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, w) in members {
        let a = *anchor.get_or_insert(x);
        num += w * (x - a);
        den += w;
    }
    anchor.map(|a| a + num / den)
}

/// Index of the nearest center; ties go to the lower index.
#[inline]
pub(crate) fn nearest(value: f64, centers: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, &c) in centers.iter().enumerate() {
        let d = (c - value).abs();
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

pub fn weighted_kmeans(
    values: &[f64],
    weights: &[f64],
    k: usize,
    rng: &mut Rng,
    opts: &KMeansOptions,
) -> Result<Assignment> {
    weighted_kmeans_traced(values, weights, k, rng, opts).map(|(a, _)| a)
}

/// Like [`weighted_kmeans`] but also returns the objective after every Lloyd
/// iteration.
pub fn weighted_kmeans_traced(
    values: &[f64],
    weights: &[f64],
    k: usize,
    rng: &mut Rng,
    opts: &KMeansOptions,
) -> Result<(Assignment, Vec<f64>)> {
    if k < 1 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "k-means needs matching non-empty inputs, got {} values and {} weights",
            values.len(),
            weights.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means values"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("k-means weights"));
    }
    if weights.iter().any(|&w| w <= 0.0) {
        return Err(Error::invalid("k-means weights must be positive"));
    }

    let mut centers = match opts.init {
        KMeansInit::Optimal => optimal_centers(values, weights, k),
        KMeansInit::PlusPlus => plus_plus_centers(values, weights, k, rng),
    };
    centers.sort_by(f64::total_cmp);

    let n = values.len();
    let mut labels = vec![0usize; n];
    let mut counts = vec![0usize; k];
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..opts.max_iters.max(1) {
        counts.iter_mut().for_each(|c| *c = 0);
        for (label, &x) in labels.iter_mut().zip(values) {
            *label = nearest(x, &centers);
            counts[*label] += 1;
        }
        reseed_empty(values, weights, &mut labels, &mut centers, &mut counts);

        for (j, center) in centers.iter_mut().enumerate() {
            if counts[j] == 0 {
                continue;
            }
            let members = labels
                .iter()
                .zip(values.iter().zip(weights))
                .filter(|(&l, _)| l == j)
                .map(|(_, (&x, &w))| (x, w));
            *center = weighted_centroid(members).expect("non-empty cluster");
        }
        sort_centers(&mut centers, &mut labels);

        let obj = weighted_objective(values, weights, &labels, &centers);
        trace.push(obj);
        let converged = obj == 0.0 || (prev.is_finite() && prev - obj <= opts.tol * prev);
        prev = obj;
        if converged {
            break;
        }
    }

    let objective = weighted_objective(values, weights, &labels, &centers);
    Ok((
        Assignment {
            labels,
            centers,
            objective,
        },
        trace,
    ))
}

/// Move each empty center onto the point with the largest weighted residual
/// among clusters that can spare a member.
fn reseed_empty(values: &[f64], weights: &[f64], labels: &mut [usize], centers: &mut [f64], counts: &mut [usize]) {
    for j in 0..centers.len() {
        if counts[j] != 0 {
            continue;
        }
        let mut donor = None;
        let mut worst = -1.0;
        for (i, (&x, &w)) in values.iter().zip(weights).enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = centers[labels[i]] - x;
            let r = w * d * d;
            if r > worst {
                worst = r;
                donor = Some(i);
            }
        }
        let Some(i) = donor else { continue };
        counts[labels[i]] -= 1;
        labels[i] = j;
        counts[j] = 1;
        centers[j] = values[i];
    }
}

fn sort_centers(centers: &mut [f64], labels: &mut [usize]) {
    let mut order: Vec<usize> = (0..centers.len()).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let mut rank = vec![0; centers.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let sorted: Vec<f64> = order.iter().map(|&o| centers[o]).collect();
    centers.copy_from_slice(&sorted);
    labels.iter_mut().for_each(|l| *l = rank[*l]);
}

fn plus_plus_centers(values: &[f64], weights: &[f64], k: usize, rng: &mut Rng) -> Vec<f64> {
    let sample = |scores: &[f64], rng: &mut Rng| -> usize {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) {
            return 0;
        }
        let target = rng.uniform() * total;
        let mut acc = 0.0;
        for (i, &s) in scores.iter().enumerate() {
            acc += s;
            if acc > target {
                return i;
            }
        }
        scores.len() - 1
    };
    let mut centers = vec![values[sample(weights, rng)]];
    let mut d2: Vec<f64> = values.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let c = values[sample(&scores, rng)];
        centers.push(c);
        for (d, &x) in d2.iter_mut().zip(values) {
            *d = d.min((x - c).powi(2));
        }
    }
    centers
}

/// Centers of the optimal contiguous partition of the sorted data into
/// `min(k, n)` clusters, padded with copies of the largest center.
fn optimal_centers(values: &[f64], weights: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let xs: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let ws: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    let parts = k.min(n);
    let bounds = optimal_partition(&xs, &ws, parts);
    let mut centers: Vec<f64> = bounds
        .windows(2)
        .map(|b| weighted_centroid((b[0]..b[1]).map(|i| (xs[i], ws[i]))).expect("non-empty segment"))
        .collect();
    let last = *centers.last().expect("at least one segment");
    centers.resize(k, last);
    centers
}

/// Segment boundaries `0 = b₀ < b₁ < … < b_k = n` minimizing the total
/// within-segment weighted squared deviation of sorted `xs`.
pub(crate) fn optimal_partition(xs: &[f64], ws: &[f64], k: usize) -> Vec<usize> {
    let n = xs.len();
    assert!(k >= 1 && k <= n);
    // Center the data first; the prefix-sum cost formula loses precision
    // when the mean is large compared to the spread.
    let total_w: f64 = ws.iter().sum();
    let shift = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / total_w;
    let mut pw = vec![0.0; n + 1];
    let mut px = vec![0.0; n + 1];
    let mut pxx = vec![0.0; n + 1];
    for i in 0..n {
        let x = xs[i] - shift;
        pw[i + 1] = pw[i] + ws[i];
        px[i + 1] = px[i] + ws[i] * x;
        pxx[i + 1] = pxx[i] + ws[i] * x * x;
    }
    let cost = |a: usize, b: usize| -> f64 {
        let w = pw[b] - pw[a];
        let s = px[b] - px[a];
        (pxx[b] - pxx[a] - s * s / w).max(0.0)
    };

    let mut prev = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    let mut splits = vec![vec![0usize; n + 1]; k + 1];
    for q in 1..=k {
        let mut cur = vec![f64::INFINITY; n + 1];
        let split = &mut splits[q];
        // Segment q ends at b ∈ [q, n] and starts at a ∈ [q-1, b-1].
        let mut stack = vec![(q, n, q - 1, n - 1)];
        while let Some((lo, hi, opt_lo, opt_hi)) = stack.pop() {
            if lo > hi {
                continue;
            }
            let mid = (lo + hi) / 2;
            let mut best = f64::INFINITY;
            let mut best_a = opt_lo;
            for a in opt_lo..=opt_hi.min(mid - 1) {
                let v = prev[a] + cost(a, mid);
                if v < best {
                    best = v;
                    best_a = a;
                }
            }
            cur[mid] = best;
            split[mid] = best_a;
            if mid > lo {
                stack.push((lo, mid - 1, opt_lo, best_a));
            }
            stack.push((mid + 1, hi, best_a, opt_hi));
        }
        prev = cur;
    }

    let mut bounds = vec![n];
    let mut b = n;
    for q in (1..=k).rev() {
        b = splits[q][b];
        bounds.push(b);
    }
    bounds.reverse();
    bounds
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(values: &[f64], weights: &[f64], k: usize) -> Assignment {
        weighted_kmeans(values, weights, k, &mut Rng::new(0), &KMeansOptions::default()).unwrap()
    }

    #[test]
    fn separable_clusters() {
        let a = run(&[1.0, 1.0, 5.0, 5.0], &[1.0; 4], 2);
        assert_eq!(a.centers, vec![1.0, 5.0]);
        assert_eq!(a.objective, 0.0);
        assert_eq!(a.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn best_two_partition() {
        let a = run(&[0.0, 1.0, 2.0, 10.0], &[1.0; 4], 2);
        assert_eq!(a.centers, vec![1.0, 10.0]);
        assert_eq!(a.objective, 2.0);
    }

    #[test]
    fn weighted_single_center() {
        let a = run(&[0.0, 10.0], &[3.0, 1.0], 1);
        assert_eq!(a.centers, vec![2.5]);
        assert_eq!(a.objective, 75.0);
    }

    #[test]
    fn few_distinct_values_give_zero_objective() {
        let a = run(&[2.0, 2.0, 2.0, 7.0, 7.0, 2.0], &[1.0, 2.0, 3.0, 1.0, 1.0, 5.0], 4);
        assert_eq!(a.objective, 0.0);
        assert_eq!(a.centers.len(), 4);
        for (l, x) in a.labels.iter().zip([2.0, 2.0, 2.0, 7.0, 7.0, 2.0]) {
            assert_eq!(a.centers[*l], x);
        }
        // fewer points than centers
        let a = run(&[3.0, -1.0], &[1.0, 1.0], 4);
        assert_eq!(a.objective, 0.0);
        assert!(a.labels.iter().all(|&l| l < 4));
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = Rng::new(0);
        let o = KMeansOptions::default();
        assert!(weighted_kmeans(&[1.0], &[1.0], 0, &mut rng, &o).is_err());
        assert!(matches!(
            weighted_kmeans(&[1.0, 2.0], &[1.0, f64::INFINITY], 1, &mut rng, &o),
            Err(Error::NonFinite(_))
        ));
        assert!(weighted_kmeans(&[1.0, 2.0], &[1.0, 0.0], 1, &mut rng, &o).is_err());
        assert!(weighted_kmeans(&[1.0, 2.0], &[1.0], 1, &mut rng, &o).is_err());
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = Rng::new(77);
        for init in [KMeansInit::Optimal, KMeansInit::PlusPlus] {
            for _ in 0..50 {
                let n = 10 + rng.below(60);
                let values = rng.gaussian_vec(n);
                let weights: Vec<f64> = (0..n).map(|_| 0.1 + rng.uniform()).collect();
                let opts = KMeansOptions {
                    init,
                    tol: 0.0,
                    ..Default::default()
                };
                let (a, trace) = weighted_kmeans_traced(&values, &weights, 4, &mut rng, &opts).unwrap();
                for pair in trace.windows(2) {
                    assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{trace:?}");
                }
                let recomputed = weighted_objective(&values, &weights, &a.labels, &a.centers);
                assert_eq!(recomputed, a.objective);
                assert!(a.centers.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn partition_matches_brute_force_on_small_inputs() {
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let n = 1 + rng.below(9);
            let k = 1 + rng.below(n.min(4));
            let mut xs = rng.gaussian_vec(n);
            xs.sort_by(f64::total_cmp);
            let ws: Vec<f64> = (0..n).map(|_| 0.5 + rng.uniform()).collect();
            let seg_cost = |a: usize, b: usize| {
                let c = weighted_centroid((a..b).map(|i| (xs[i], ws[i]))).unwrap();
                (a..b).map(|i| ws[i] * (xs[i] - c).powi(2)).sum::<f64>()
            };
            let bounds = optimal_partition(&xs, &ws, k);
            let dp: f64 = bounds.windows(2).map(|b| seg_cost(b[0], b[1])).sum();
            // enumerate all (k-1)-subsets of cut positions 1..n
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << (n - 1)) {
                if mask.count_ones() as usize != k - 1 {
                    continue;
                }
                let mut cuts = vec![0];
                cuts.extend((1..n).filter(|i| mask & (1 << (i - 1)) != 0));
                cuts.push(n);
                best = best.min(cuts.windows(2).map(|b| seg_cost(b[0], b[1])).sum());
            }
            assert!((dp - best).abs() <= 1e-9 * (1.0 + best), "dp {dp} brute {best}");
        }
    }

    #[test]
    fn plus_plus_is_seed_deterministic() {
        let values: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64).collect();
        let weights = vec![1.0; 40];
        let opts = KMeansOptions {
            init: KMeansInit::PlusPlus,
            ..Default::default()
        };
        let a = weighted_kmeans(&values, &weights, 3, &mut Rng::new(9), &opts).unwrap();
        let b = weighted_kmeans(&values, &weights, 3, &mut Rng::new(9), &opts).unwrap();
        assert_eq!(a, b);
    }
}
