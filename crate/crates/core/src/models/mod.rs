//! Classifiers and the prediction interface the attacks consume.

mod gnb;
mod mlp;
mod persist;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::budget::PrivacyBudget;
use crate::error::{Error, Result};

pub use gnb::{fit_gnb, fit_gnb_dp, GnbModel, STD_FLOOR};
pub use mlp::{fit_mlp, fit_mlp_dp, Activation, Layer, MlpHyper, MlpModel};
pub use persist::{load_model, save_model, AnyModel};

/// Smallest probability used when turning a prediction into a loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// A trained classifier exposing class probabilities and its training loss.
pub trait PredictiveModel: Send + Sync {
    fn n_features(&self) -> usize;

    fn n_classes(&self) -> usize;

    /// Class probabilities for every row of `x`. Width is not checked here;
    /// use [`predict_proba`] at API boundaries.
    fn proba(&self, x: &Array2<f64>) -> Array2<f64>;

    /// Mean cross-entropy over the data the model was fit on.
    fn training_loss(&self) -> Option<f64>;

    fn privacy(&self) -> PrivacyBudget;

    /// Evaluator for "row with one attribute replaced" queries over `x`.
    fn attribute_probe<'a>(&'a self, x: &'a Array2<f64>) -> Box<dyn AttributeProbe + 'a> {
        Box::new(SubstitutingProbe { model: self, x })
    }
}

/// Answers repeated substitution queries against a fixed set of rows.
pub trait AttributeProbe {
    /// Probabilities for every row with column `attr` set to `value`.
    fn proba_with(&self, attr: usize, value: f64) -> Array2<f64>;
}

struct SubstitutingProbe<'a, M: PredictiveModel + ?Sized> {
    model: &'a M,
    x: &'a Array2<f64>,
}

impl<M: PredictiveModel + ?Sized> AttributeProbe for SubstitutingProbe<'_, M> {
    fn proba_with(&self, attr: usize, value: f64) -> Array2<f64> {
        let mut x = self.x.clone();
        x.column_mut(attr).fill(value);
        self.model.proba(&x)
    }
}

fn check_width(model: &(impl PredictiveModel + ?Sized), got: usize) -> Result<()> {
    if got == model.n_features() {
        Ok(())
    } else {
        Err(Error::WidthMismatch {
            expected: model.n_features(),
            got,
        })
    }
}

/// `n x k` matrix of class probabilities; each row sums to one.
pub fn predict_proba(model: &(impl PredictiveModel + ?Sized), x: &Array2<f64>) -> Result<Array2<f64>> {
    check_width(model, x.ncols())?;
    Ok(model.proba(x))
}

/// Argmax class per row; ties go to the lower class index.
pub fn predict(model: &(impl PredictiveModel + ?Sized), x: &Array2<f64>) -> Result<Vec<usize>> {
    Ok(predict_proba(model, x)?
        .axis_iter(Axis(0))
        .map(|row| argmax(row))
        .collect())
}

pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Largest class probability of a row.
pub fn confidence(row: ArrayView1<f64>) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Cross-entropy of a probability: `-ln(max(p, 1e-12))`.
pub fn loss_from_probability(p: f64) -> f64 {
    -p.max(PROB_FLOOR).ln()
}

/// Cross-entropy of one example under `model`.
pub fn per_example_loss(model: &(impl PredictiveModel + ?Sized), x: ArrayView1<f64>, true_label: usize) -> Result<f64> {
    check_width(model, x.len())?;
    if true_label >= model.n_classes() {
        return Err(Error::InvalidLabel {
            label: true_label,
            n_classes: model.n_classes(),
        });
    }
    let row = x.to_owned().insert_axis(Axis(0));
    Ok(loss_from_probability(model.proba(&row)[[0, true_label]]))
}

/// Per-row losses from a probability matrix.
pub fn losses_from_proba(proba: &Array2<f64>, labels: &[usize]) -> Vec<f64> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &y)| loss_from_probability(proba[[i, y]]))
        .collect()
}

/// Mean cross-entropy of `model` over a labeled matrix.
pub fn mean_loss(model: &(impl PredictiveModel + ?Sized), x: &Array2<f64>, labels: &[usize]) -> f64 {
    let losses = losses_from_proba(&model.proba(x), labels);
    losses.iter().sum::<f64>() / losses.len() as f64
}

/// Row-wise softmax of log-scores, in place.
pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|s| (s - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

pub(crate) fn one_row(x: &[f64]) -> Array2<f64> {
    Array1::from(x.to_vec()).insert_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn loss_closed_forms() {
        assert_eq!(loss_from_probability(1.0), 0.0);
        assert!((loss_from_probability(0.5) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(loss_from_probability(1e-20), -(1e-12f64).ln());
        assert_eq!(loss_from_probability(0.0), -(1e-12f64).ln());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut s = array![[1000.0, 1000.0], [-3.0, 2.0], [0.0, -1e9]];
        softmax_rows(&mut s);
        for row in s.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(s[[0, 0]], 0.5);
    }

    #[test]
    fn argmax_ties_to_lower_index() {
        assert_eq!(argmax(array![0.4, 0.4, 0.2].view()), 0);
        assert_eq!(argmax(array![0.1, 0.5, 0.4].view()), 1);
    }
}
