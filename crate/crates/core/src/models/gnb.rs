//! Gaussian Naive Bayes, with optional Laplace perturbation of the learned
//! per-class means and standard deviations.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};

use super::{mean_loss, softmax_rows, AttributeProbe, PredictiveModel};
use crate::budget::{PrivacyBudget, Stage};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::mechanisms::{laplace_sample, nb_sensitivities};
use crate::rng::SeededRng;

/// No standard deviation used in prediction is ever below this.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GnbModel {
    class_priors: Vec<f64>,
    means: Array2<f64>,
    stds: Array2<f64>,
    privacy: PrivacyBudget,
    training_loss: f64,
    // cached per class: ln prior - sum_j ln(sigma_j sqrt(2 pi))
    log_norm: Array1<f64>,
    inv_var: Array2<f64>,
}

impl GnbModel {
    pub(crate) fn from_parts(
        class_priors: Vec<f64>,
        means: Array2<f64>,
        stds: Array2<f64>,
        privacy: PrivacyBudget,
        training_loss: f64,
    ) -> Result<Self> {
        let k = class_priors.len();
        if means.dim() != stds.dim() || means.nrows() != k || k < 2 || means.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "inconsistent GNB shapes: {k} priors, means {:?}, stds {:?}",
                means.dim(),
                stds.dim()
            )));
        }
        let prior_sum: f64 = class_priors.iter().sum();
        if (prior_sum - 1.0).abs() > 1e-9 || class_priors.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidArgument(format!("priors sum to {prior_sum}")));
        }
        if stds.iter().any(|s| !(*s >= STD_FLOOR)) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument(
                "GNB parameters must be finite with stds at or above the floor".into(),
            ));
        }
        let half_ln_2pi = 0.5 * (2.0 * PI).ln();
        let log_norm = Array1::from_iter((0..k).map(|c| {
            class_priors[c].ln() - stds.row(c).iter().map(|s| s.ln() + half_ln_2pi).sum::<f64>()
        }));
        let inv_var = stds.mapv(|s| 1.0 / (s * s));
        Ok(Self {
            class_priors,
            means,
            stds,
            privacy,
            training_loss,
            log_norm,
            inv_var,
        })
    }

    /// Tag the model with the budget that was spent on its inputs.
    pub fn with_privacy(mut self, privacy: PrivacyBudget) -> Self {
        self.privacy = privacy;
        self
    }

    pub fn class_priors(&self) -> &[f64] {
        &self.class_priors
    }

    pub fn means(&self) -> &Array2<f64> {
        &self.means
    }

    pub fn stds(&self) -> &Array2<f64> {
        &self.stds
    }

    /// Unnormalized log posterior of each class for each row.
    pub fn log_scores(&self, x: &Array2<f64>) -> Array2<f64> {
        let k = self.class_priors.len();
        let mut scores = Array2::zeros((x.nrows(), k));
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            for c in 0..k {
                let mu = self.means.row(c);
                let iv = self.inv_var.row(c);
                let quad: f64 = row
                    .iter()
                    .zip(mu.iter().zip(iv.iter()))
                    .map(|(v, (m, w))| (v - m) * (v - m) * w)
                    .sum();
                scores[[i, c]] = self.log_norm[c] - 0.5 * quad;
            }
        }
        scores
    }

    fn feature_term(&self, c: usize, j: usize, v: f64) -> f64 {
        let d = v - self.means[[c, j]];
        -0.5 * d * d * self.inv_var[[c, j]]
    }
}

impl PredictiveModel for GnbModel {
    fn n_features(&self) -> usize {
        self.means.ncols()
    }

    fn n_classes(&self) -> usize {
        self.class_priors.len()
    }

    fn proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut s = self.log_scores(x);
        softmax_rows(&mut s);
        s
    }

    fn training_loss(&self) -> Option<f64> {
        Some(self.training_loss)
    }

    fn privacy(&self) -> PrivacyBudget {
        self.privacy
    }

    fn attribute_probe<'a>(&'a self, x: &'a Array2<f64>) -> Box<dyn AttributeProbe + 'a> {
        Box::new(GnbProbe {
            model: self,
            x,
            base: self.log_scores(x),
        })
    }
}

/// Swaps one feature's likelihood term in cached log-scores.
struct GnbProbe<'a> {
    model: &'a GnbModel,
    x: &'a Array2<f64>,
    base: Array2<f64>,
}

impl AttributeProbe for GnbProbe<'_> {
    fn proba_with(&self, attr: usize, value: f64) -> Array2<f64> {
        let mut s = self.base.clone();
        let k = self.model.n_classes();
        for (i, mut row) in s.axis_iter_mut(Axis(0)).enumerate() {
            let old = self.x[[i, attr]];
            for c in 0..k {
                row[c] += self.model.feature_term(c, attr, value) - self.model.feature_term(c, attr, old);
            }
        }
        softmax_rows(&mut s);
        s
    }
}

struct ClassStats {
    counts: Vec<usize>,
    means: Array2<f64>,
    stds: Array2<f64>,
}

fn class_stats(train: &LabeledDataset) -> Result<ClassStats> {
    let k = train.n_classes();
    let p = train.n_features();
    let counts = train.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::SparseClass { class, count });
    }
    let mut means = Array2::<f64>::zeros((k, p));
    for (row, &y) in train.features().rows().into_iter().zip(train.labels()) {
        means.row_mut(y).scaled_add(1.0, &row);
    }
    for (c, mut m) in means.axis_iter_mut(Axis(0)).enumerate() {
        m /= counts[c] as f64;
    }
    let mut var = Array2::<f64>::zeros((k, p));
    for (row, &y) in train.features().rows().into_iter().zip(train.labels()) {
        let mut v = var.row_mut(y);
        for ((acc, x), m) in v.iter_mut().zip(row.iter()).zip(means.row(y).iter()) {
            *acc += (x - m) * (x - m);
        }
    }
    for (c, mut v) in var.axis_iter_mut(Axis(0)).enumerate() {
        v /= counts[c] as f64;
    }
    Ok(ClassStats {
        counts,
        means,
        stds: var.mapv(f64::sqrt),
    })
}

fn finish(
    train: &LabeledDataset,
    counts: &[usize],
    means: Array2<f64>,
    stds: Array2<f64>,
    privacy: PrivacyBudget,
) -> Result<GnbModel> {
    let n = train.n_rows() as f64;
    let priors = counts.iter().map(|&c| c as f64 / n).collect();
    let stds = stds.mapv(|s| s.max(STD_FLOOR));
    let model = GnbModel::from_parts(priors, means, stds, privacy, 0.0)?;
    let loss = mean_loss(&model, train.features(), train.labels());
    Ok(GnbModel {
        training_loss: loss,
        ..model
    })
}

/// Per-class, per-feature mean and population std; priors are class frequencies.
pub fn fit_gnb(train: &LabeledDataset) -> Result<GnbModel> {
    let stats = class_stats(train)?;
    finish(train, &stats.counts, stats.means, stats.stds, PrivacyBudget::non_private())
}

/// [`fit_gnb`] followed by Laplace noise on every class mean and std.
/// Priors stay exact. A non-private budget returns exactly `fit_gnb(train)`.
pub fn fit_gnb_dp(train: &LabeledDataset, budget: PrivacyBudget, rng: &mut SeededRng) -> Result<GnbModel> {
    let Some(epsilon) = budget.epsilon() else {
        return fit_gnb(train);
    };
    if budget.stage() != Stage::S3 {
        return Err(Error::InvalidArgument(format!(
            "parameter perturbation spends its budget at S3, not {}",
            budget.stage()
        )));
    }
    let stats = class_stats(train)?;
    let p = train.n_features();
    let mut means = stats.means;
    let mut stds = stats.stds;
    for (c, &n_c) in stats.counts.iter().enumerate() {
        for j in 0..p {
            let sens = nb_sensitivities(n_c, train.range_width(j), epsilon, p)?;
            means[[c, j]] += laplace_sample(sens.mean_scale()?, rng);
            stds[[c, j]] += laplace_sample(sens.std_scale()?, rng);
        }
    }
    finish(train, &stats.counts, means, stds, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{per_example_loss, predict, predict_proba};
    use ndarray::array;

    fn four_points() -> LabeledDataset {
        LabeledDataset::with_unit_ranges(array![[0.0], [0.2], [0.8], [1.0]], vec![0, 0, 1, 1], 2).unwrap()
    }

    #[test]
    fn closed_form_parameters() {
        let m = fit_gnb(&four_points()).unwrap();
        assert!((m.means()[[0, 0]] - 0.1).abs() < 1e-12);
        assert!((m.means()[[1, 0]] - 0.9).abs() < 1e-12);
        assert!((m.stds()[[0, 0]] - 0.1).abs() < 1e-12);
        assert!((m.stds()[[1, 0]] - 0.1).abs() < 1e-12);
        assert_eq!(m.class_priors(), &[0.5, 0.5]);
    }

    #[test]
    fn likelihood_ratio_predictions() {
        let m = fit_gnb(&four_points()).unwrap();
        let p = predict_proba(&m, &array![[0.1], [0.9]]).unwrap();
        // oracle: equal priors and stds, ratio = exp(((x-0.9)^2 - (x-0.1)^2) / (2 * 0.01))
        let ratio = (((0.1f64 - 0.9).powi(2) - 0.0) / 0.02).exp();
        assert!((p[[0, 0]] - ratio / (1.0 + ratio)).abs() < 1e-12);
        assert!(p[[0, 0]] > 0.99);
        assert_eq!(predict(&m, &array![[0.9]]).unwrap(), vec![1]);
    }

    #[test]
    fn missing_class_is_an_error() {
        let ds = LabeledDataset::with_unit_ranges(array![[0.0], [0.2], [0.5]], vec![0, 0, 0], 2).unwrap();
        assert!(matches!(fit_gnb(&ds), Err(Error::SparseClass { class: 1, count: 0 })));
    }

    #[test]
    fn training_loss_matches_mean_example_loss() {
        let ds = four_points();
        let m = fit_gnb(&ds).unwrap();
        let mean: f64 = (0..4)
            .map(|i| per_example_loss(&m, ds.row(i), ds.labels()[i]).unwrap())
            .sum::<f64>()
            / 4.0;
        assert!((m.training_loss().unwrap() - mean).abs() < 1e-9);
    }

    #[test]
    fn non_private_dp_fit_is_identical() {
        let ds = four_points();
        let a = fit_gnb(&ds).unwrap();
        let b = fit_gnb_dp(&ds, PrivacyBudget::non_private(), &mut SeededRng::new(1, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dp_fit_is_seed_deterministic_and_floored() {
        let ds = four_points();
        let budget = PrivacyBudget::new(0.01, Stage::S3).unwrap();
        let a = fit_gnb_dp(&ds, budget, &mut SeededRng::new(2, 0)).unwrap();
        let b = fit_gnb_dp(&ds, budget, &mut SeededRng::new(2, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.stds().iter().all(|&s| s >= STD_FLOOR));
        assert!(fit_gnb_dp(&ds, PrivacyBudget::new(1.0, Stage::S1).unwrap(), &mut SeededRng::new(2, 0)).is_err());
    }

    #[test]
    fn heavy_noise_on_four_points_is_near_chance() {
        let ds = four_points();
        let budget = PrivacyBudget::new(0.01, Stage::S3).unwrap();
        let reps = 100;
        let mut total = 0.0;
        for r in 0..reps {
            let m = fit_gnb_dp(&ds, budget, &mut SeededRng::new(77, r)).unwrap();
            let pred = predict(&m, ds.features()).unwrap();
            total += crate::metrics::accuracy(&pred, ds.labels()).unwrap();
        }
        let mean = total / reps as f64;
        // Monte-Carlo oracle: noise scale 2p/(3 eps) = 66.7 swamps a 0.8 gap
        assert!((mean - 0.5).abs() < 0.15, "mean training accuracy {mean}");
    }

    #[test]
    fn probe_matches_substitution() {
        let ds = LabeledDataset::with_unit_ranges(
            array![[0.1, 0.9], [0.2, 0.7], [0.8, 0.3], [0.9, 0.2], [0.5, 0.5], [0.4, 0.6]],
            vec![0, 0, 1, 1, 2, 2],
            3,
        )
        .unwrap();
        let m = fit_gnb(&ds).unwrap();
        let probe = m.attribute_probe(ds.features());
        let mut sub = ds.features().clone();
        sub.column_mut(1).fill(0.35);
        let direct = m.proba(&sub);
        let fast = probe.proba_with(1, 0.35);
        for (a, b) in direct.iter().zip(fast.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
