//! Lloyd's k-means with k-means++ seeding and restarts.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KMeansConfig {
    pub max_iterations: usize,
    /// Stop once the inertia decrease between iterations falls to this or below.
    pub tolerance: f64,
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansModel {
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

/// Cluster `x` into `k` groups and label each row by its nearest centroid.
/// Every label in `0..k` is used at least once.
pub fn kmeans_label(x: &Array2<f64>, k: usize, seed: u64) -> Result<(Vec<usize>, KMeansModel)> {
    kmeans_label_with(x, k, seed, &KMeansConfig::default())
}

pub fn kmeans_label_with(
    x: &Array2<f64>,
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<(Vec<usize>, KMeansModel)> {
    let n = x.nrows();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k-means needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means with k = {k} exceeds the {n} available points"
        )));
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidArgument("k-means needs at least one restart".into()));
    }
    let root = SeededRng::new(seed, 0);
    let row_norms: Array1<f64> = x.map_axis(Axis(1), |r| r.dot(&r));
    let runs: Vec<(Vec<usize>, KMeansModel)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = root.derive_indexed("restart", r as u64);
            lloyd(x, &row_norms, k, cfg, &mut rng)
        })
        .collect();
    // lowest inertia, ties to the lowest restart index
    let best = runs
        .into_iter()
        .reduce(|best, cand| if cand.1.inertia < best.1.inertia { cand } else { best })
        .expect("at least one restart");
    Ok(best)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

fn plus_plus_init(x: &Array2<f64>, k: usize, rng: &mut SeededRng) -> Array2<f64> {
    let n = x.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // all remaining mass is zero (duplicates): take any unchosen row
            Err(_) => (0..n).find(|i| !chosen.contains(i)).expect("k <= n"),
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select(Axis(0), &chosen)
}

/// Nearest-centroid assignment. Returns labels and squared distances.
fn assign(x: &Array2<f64>, row_norms: &Array1<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    let cross = x.dot(&centroids.t());
    let c_norms: Array1<f64> = centroids.map_axis(Axis(1), |r| r.dot(&r));
    let mut labels = vec![0; x.nrows()];
    let mut dists = vec![0.0; x.nrows()];
    for (i, row) in cross.axis_iter(Axis(0)).enumerate() {
        let mut best = (0, f64::INFINITY);
        for (j, &c) in row.iter().enumerate() {
            let d = row_norms[i] - 2.0 * c + c_norms[j];
            if d < best.1 {
                best = (j, d);
            }
        }
        labels[i] = best.0;
        // expanded form can dip below zero by rounding; recompute exactly
        dists[i] = sq_dist(x.row(i), centroids.row(best.0));
    }
    (labels, dists)
}

/// Move each empty cluster's centroid onto the point farthest from its own
/// centroid, taken from a cluster that can spare it.
fn repair_empty(
    x: &Array2<f64>,
    centroids: &mut Array2<f64>,
    labels: &mut [usize],
    dists: &mut [f64],
    k: usize,
) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let far = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
            .expect("k <= n guarantees a donor cluster");
        counts[labels[far]] -= 1;
        counts[empty] += 1;
        labels[far] = empty;
        dists[far] = 0.0;
        centroids.row_mut(empty).assign(&x.row(far));
    }
}

fn lloyd(
    x: &Array2<f64>,
    row_norms: &Array1<f64>,
    k: usize,
    cfg: &KMeansConfig,
    rng: &mut SeededRng,
) -> (Vec<usize>, KMeansModel) {
    let p = x.ncols();
    let mut centroids = plus_plus_init(x, k, rng);
    let mut history = Vec::new();
    let mut labels;
    let mut iterations = 0;
    loop {
        let (mut l, mut d) = assign(x, row_norms, &centroids);
        repair_empty(x, &mut centroids, &mut l, &mut d, k);
        labels = l;
        let inertia: f64 = d.iter().sum();
        iterations += 1;
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| prev - inertia <= cfg.tolerance);
        history.push(inertia);
        if converged || iterations >= cfg.max_iterations {
            break;
        }
        let mut sums = Array2::<f64>::zeros((k, p));
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &x.row(i));
            counts[c] += 1;
        }
        for (c, mut row) in sums.axis_iter_mut(Axis(0)).enumerate() {
            row /= counts[c] as f64;
        }
        centroids = sums;
    }
    let inertia = *history.last().expect("one iteration ran");
    (
        labels,
        KMeansModel {
            centroids,
            inertia,
            iterations_run: iterations,
            inertia_history: history,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_bad_k() {
        let x = array![[0.0], [1.0]];
        assert!(kmeans_label(&x, 3, 0).is_err());
        assert!(kmeans_label(&x, 1, 0).is_err());
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let x = array![[0.0, 0.0], [0.3, 0.1], [0.9, 0.2], [0.5, 0.5]];
        let (labels, model) = kmeans_label(&x, 4, 5).unwrap();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_eq!(model.inertia, 0.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| ((i * 7 + j * 13) % 17) as f64 / 17.0);
        let a = kmeans_label(&x, 4, 99).unwrap();
        let b = kmeans_label(&x, 4, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let x = array![[0.5], [0.5], [0.5], [0.5], [0.1]];
        let (labels, _) = kmeans_label(&x, 3, 1).unwrap();
        for c in 0..3 {
            assert!(labels.contains(&c), "class {c} empty: {labels:?}");
        }
    }

    #[test]
    fn inertia_never_increases() {
        let x = Array2::from_shape_fn((400, 5), |(i, j)| ((i * 31 + j * 17) % 101) as f64 / 101.0);
        let cfg = KMeansConfig { restarts: 3, ..Default::default() };
        let (_, model) = kmeans_label_with(&x, 8, 3, &cfg).unwrap();
        for w in model.inertia_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", model.inertia_history);
        }
    }
}
