use std::collections::HashSet;

use ndarray::{Array2, Axis};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::AttackResult;
use crate::models::{confidence, losses_from_proba, predict_proba, PredictiveModel};

/// Confidence cut-off for the confidence-based membership attack.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MiThreshold {
    pub threshold: f64,
    /// Total number of reference vectors it was fit on.
    pub calibration_size: usize,
}

/// Fails if the two index sets share any element.
pub fn ensure_disjoint(a: &[usize], b: &[usize]) -> Result<()> {
    let set: HashSet<usize> = a.iter().copied().collect();
    let overlap = b.iter().filter(|i| set.contains(i)).count();
    if overlap == 0 {
        Ok(())
    } else {
        Err(Error::OverlappingSets(overlap))
    }
}

fn confidences(model: &(impl PredictiveModel + ?Sized), x: &Array2<f64>) -> Result<Vec<f64>> {
    Ok(predict_proba(model, x)?.axis_iter(Axis(0)).map(confidence).collect())
}

/// Threshold on the top-class probability that maximizes `TPR - FPR` on a
/// reference member/non-member pair. Ties go to the larger threshold.
pub fn calibrate_salem_threshold(
    model: &(impl PredictiveModel + ?Sized),
    ref_members: &Array2<f64>,
    ref_nonmembers: &Array2<f64>,
) -> Result<MiThreshold> {
    if ref_members.nrows() == 0 || ref_nonmembers.nrows() == 0 {
        return Err(Error::InvalidArgument("reference sets must be non-empty".into()));
    }
    let members = confidences(model, ref_members)?;
    let nonmembers = confidences(model, ref_nonmembers)?;
    Ok(MiThreshold {
        threshold: best_threshold(&members, &nonmembers),
        calibration_size: members.len() + nonmembers.len(),
    })
}

/// Exhaustive search over observed scores, walked from high to low.
fn best_threshold(members: &[f64], nonmembers: &[f64]) -> f64 {
    let mut m = members.to_vec();
    let mut n = nonmembers.to_vec();
    m.sort_by(|a, b| b.total_cmp(a));
    n.sort_by(|a, b| b.total_cmp(a));
    let mut candidates: Vec<f64> = m.iter().chain(&n).copied().collect();
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();

    let (nm, nn) = (m.len() as f64, n.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for &t in &candidates {
        while i < m.len() && m[i] >= t {
            i += 1;
        }
        while j < n.len() && n[j] >= t {
            j += 1;
        }
        let adv = i as f64 / nm - j as f64 / nn;
        if adv > best.0 {
            best = (adv, t);
        }
    }
    best.1
}

/// Score a threshold against precomputed top-class confidences.
pub fn salem_mi_from_confidences(members: &[f64], nonmembers: &[f64], threshold: &MiThreshold) -> Result<AttackResult> {
    let hits = |c: &[f64]| c.iter().filter(|&&v| v >= threshold.threshold).count();
    AttackResult::from_counts(hits(members), members.len(), hits(nonmembers), nonmembers.len())
}

/// Predict "member" iff the top-class probability reaches the threshold.
/// Labels are never consulted.
pub fn salem_mi(
    model: &(impl PredictiveModel + ?Sized),
    members: &LabeledDataset,
    nonmembers: &LabeledDataset,
    threshold: &MiThreshold,
) -> Result<AttackResult> {
    salem_mi_from_confidences(
        &confidences(model, members.features())?,
        &confidences(model, nonmembers.features())?,
        threshold,
    )
}

/// Predict "member" iff the example's loss is at most the model's training loss.
pub fn yeom_mi(
    model: &(impl PredictiveModel + ?Sized),
    members: &LabeledDataset,
    nonmembers: &LabeledDataset,
) -> Result<AttackResult> {
    let train_loss = model
        .training_loss()
        .ok_or_else(|| Error::InvalidArgument("model has no recorded training loss".into()))?;
    let hits = |ds: &LabeledDataset| -> Result<usize> {
        let losses = losses_from_proba(&predict_proba(model, ds.features())?, ds.labels());
        Ok(losses.iter().filter(|&&l| l <= train_loss).count())
    };
    AttackResult::from_counts(hits(members)?, members.n_rows(), hits(nonmembers)?, nonmembers.n_rows())
}
