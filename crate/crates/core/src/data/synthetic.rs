use ndarray::Array2;
use rand::Rng;

use crate::data::kmeans::kmeans_label;
use crate::dataset::{LabeledDataset, Normalized};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SeededRng};

/// `n x p` matrix of independent `U[0, 1)` draws.
pub fn generate_synthetic(n: usize, p: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic data needs n >= 1 and p >= 1, got {n}x{p}"
        )));
    }
    let mut rng = SeededRng::new(seed, 0);
    Ok(Array2::from_shape_simple_fn((n, p), || rng.random::<f64>()))
}

/// One dataset per `k`, all sharing the same feature matrix, labeled by k-means.
pub fn relabel_family(
    features: &Array2<f64>,
    ranges: &[(f64, f64)],
    k_values: &[usize],
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    k_values
        .iter()
        .map(|&k| {
            let (labels, _) = kmeans_label(features, k, derive_seed(seed, &["kmeans", &k.to_string()]))?;
            LabeledDataset::new(features.clone(), labels, k, ranges.to_vec())
        })
        .collect()
}

/// k-means relabeling of a normalized transaction (or rating) matrix into
/// purchaser groups, one dataset per entry of `k_values`.
pub fn relabel_transactions(
    normalized: &Normalized,
    k_values: &[usize],
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    relabel_family(
        &normalized.features,
        &normalized.declared_ranges(),
        k_values,
        seed,
    )
}

/// Uniform synthetic vectors labeled at several class counts.
pub fn synthetic_family(
    n: usize,
    p: usize,
    k_values: &[usize],
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    let features = generate_synthetic(n, p, derive_seed(seed, &["synthetic"]))?;
    relabel_family(&features, &vec![(0.0, 1.0); p], k_values, seed)
}
