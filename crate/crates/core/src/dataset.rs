//! Labeled feature matrices and min-max normalization.

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Normalized feature matrix with integer class labels.
///
/// `feature_ranges` holds the declared `(min, max)` of each column in the
/// space the features live in. For normalized data this is `(0, 1)`, or
/// `(0.5, 0.5)` for a column that was constant before normalization. Noise
/// sensitivities are computed from these declared ranges, never from the
/// realized sample extremes.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    feature_ranges: Vec<(f64, f64)>,
}

impl LabeledDataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
        feature_ranges: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidDataset(format!(
                "need at least one row and one column, got {n}x{p}"
            )));
        }
        if n_classes < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        if labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        if feature_ranges.len() != p {
            return Err(Error::InvalidDataset(format!(
                "{} feature ranges for {p} columns",
                feature_ranges.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidLabel { label, n_classes });
        }
        for (j, &(lo, hi)) in feature_ranges.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidDataset(format!(
                    "column {j} has invalid range ({lo}, {hi})"
                )));
            }
        }
        for ((row, col), &v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            let (lo, hi) = feature_ranges[col];
            if v < lo || v > hi {
                return Err(Error::InvalidDataset(format!(
                    "value {v} at ({row}, {col}) outside declared range ({lo}, {hi})"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            feature_ranges,
        })
    }

    /// Dataset whose features already live in `[0, 1]`.
    pub fn with_unit_ranges(
        features: Array2<f64>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let p = features.ncols();
        Self::new(features, labels, n_classes, vec![(0.0, 1.0); p])
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn feature_ranges(&self) -> &[(f64, f64)] {
        &self.feature_ranges
    }

    /// Width `max - min` of the declared range of column `j`.
    pub fn range_width(&self, j: usize) -> f64 {
        let (lo, hi) = self.feature_ranges[j];
        hi - lo
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Rows at `indices`, in that order. Declared ranges and class count carry over.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            feature_ranges: self.feature_ranges.clone(),
        }
    }

    /// Replace the features with a perturbed copy of the same shape. Declared
    /// ranges are widened to cover the new values; sensitivity computations
    /// should still be done against the original dataset.
    pub fn with_perturbed_features(&self, features: Array2<f64>) -> Result<LabeledDataset> {
        if features.dim() != self.features.dim() {
            return Err(Error::InvalidDataset(format!(
                "perturbed shape {:?} does not match {:?}",
                features.dim(),
                self.features.dim()
            )));
        }
        let mut ranges = self.feature_ranges.clone();
        for (j, col) in features.axis_iter(Axis(1)).enumerate() {
            for &v in col {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: 0, col: j });
                }
                ranges[j].0 = ranges[j].0.min(v);
                ranges[j].1 = ranges[j].1.max(v);
            }
        }
        Ok(LabeledDataset {
            features,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
            feature_ranges: ranges,
        })
    }

    /// Same features, new labels (used by k-means relabeling).
    pub fn relabeled(&self, labels: Vec<usize>, n_classes: usize) -> Result<LabeledDataset> {
        Self::new(
            self.features.clone(),
            labels,
            n_classes,
            self.feature_ranges.clone(),
        )
    }

    /// Row count per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Output of [`minmax_normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub features: Array2<f64>,
    /// Raw `(min, max)` of each input column.
    pub raw_ranges: Vec<(f64, f64)>,
}

impl Normalized {
    /// Declared ranges in the normalized space: `(0, 1)`, or `(0.5, 0.5)`
    /// for columns that were constant.
    pub fn declared_ranges(&self) -> Vec<(f64, f64)> {
        self.raw_ranges
            .iter()
            .map(|&(lo, hi)| if hi > lo { (0.0, 1.0) } else { (0.5, 0.5) })
            .collect()
    }
}

/// Map every column affinely onto `[0, 1]`. Constant columns map to 0.5.
pub fn minmax_normalize(raw: &Array2<f64>) -> Result<Normalized> {
    if let Some(((row, col), _)) = raw.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let mut features = raw.clone();
    let mut raw_ranges = Vec::with_capacity(raw.ncols());
    for mut col in features.axis_iter_mut(Axis(1)) {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        raw_ranges.push((lo, hi));
        if hi > lo {
            let width = hi - lo;
            // clamp guards the last ulp of rounding at the upper end
            col.mapv_inplace(|v| ((v - lo) / width).clamp(0.0, 1.0));
        } else {
            col.fill(0.5);
        }
    }
    Ok(Normalized {
        features,
        raw_ranges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn normalize_column_examples() {
        let n = minmax_normalize(&array![[2.0], [4.0], [6.0]]).unwrap();
        assert_eq!(n.features, array![[0.0], [0.5], [1.0]]);
        assert_eq!(n.raw_ranges, vec![(2.0, 6.0)]);

        let n = minmax_normalize(&array![[5.0], [5.0], [5.0]]).unwrap();
        assert_eq!(n.features, array![[0.5], [0.5], [0.5]]);
        assert_eq!(n.raw_ranges, vec![(5.0, 5.0)]);
        assert_eq!(n.declared_ranges(), vec![(0.5, 0.5)]);

        let n = minmax_normalize(&array![[0.0, 10.0], [1.0, 20.0]]).unwrap();
        assert_eq!(n.features, array![[0.0, 0.0], [1.0, 1.0]]);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        let err = minmax_normalize(&array![[1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn dataset_invariants_enforced() {
        let f = array![[0.2, 0.3], [0.4, 0.9]];
        assert!(LabeledDataset::with_unit_ranges(f.clone(), vec![0, 1], 2).is_ok());
        assert!(matches!(
            LabeledDataset::with_unit_ranges(f.clone(), vec![0, 2], 2),
            Err(Error::InvalidLabel { label: 2, .. })
        ));
        assert!(LabeledDataset::with_unit_ranges(f.clone(), vec![0, 1], 1).is_err());
        assert!(LabeledDataset::with_unit_ranges(array![[1.5]], vec![0], 2).is_err());
        assert!(LabeledDataset::with_unit_ranges(Array2::zeros((0, 2)), vec![], 2).is_err());
    }

    #[test]
    fn perturbed_features_widen_ranges() {
        let ds = LabeledDataset::with_unit_ranges(array![[0.2], [0.4]], vec![0, 1], 2).unwrap();
        let noisy = ds.with_perturbed_features(array![[-3.0], [0.5]]).unwrap();
        assert_eq!(noisy.feature_ranges(), &[(-3.0, 1.0)]);
        assert_eq!(noisy.labels(), ds.labels());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(
            rows in 1usize..12,
            cols in 1usize..5,
            seed in proptest::collection::vec(-1e3f64..1e3, 60)
        ) {
            let raw = Array2::from_shape_fn((rows, cols), |(i, j)| seed[(i * cols + j) % seed.len()] * (j as f64 + 1.0));
            let once = minmax_normalize(&raw).unwrap().features;
            let twice = minmax_normalize(&once).unwrap().features;
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!(once.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
