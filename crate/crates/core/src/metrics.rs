//! Utility and privacy-leak formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} is outside [0, 1]")))
    }
}

/// Adversary advantage `TPR - FPR`.
pub fn advantage(tpr: f64, fpr: f64) -> Result<f64> {
    check_unit("tpr", tpr)?;
    check_unit("fpr", fpr)?;
    Ok(tpr - fpr)
}

/// Relative accuracy given up to privacy: `1 - acc / acc_baseline`.
///
/// Negative values mean the private model beat its baseline and are kept as is.
pub fn accuracy_loss(acc: f64, acc_baseline: f64) -> Result<f64> {
    check_unit("accuracy", acc)?;
    if !(acc_baseline > 0.0 && acc_baseline <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "baseline accuracy {acc_baseline} must lie in (0, 1]"
        )));
    }
    Ok(1.0 - acc / acc_baseline)
}

/// Fraction of `predicted` equal to `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "accuracy over {} predictions and {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Outcome of one attack run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub tpr: f64,
    pub fpr: f64,
    pub advantage: f64,
    pub n_members: usize,
    pub n_nonmembers: usize,
}

impl AttackResult {
    /// Build from raw hit counts on both populations.
    pub fn from_counts(
        member_hits: usize,
        n_members: usize,
        nonmember_hits: usize,
        n_nonmembers: usize,
    ) -> Result<Self> {
        if n_members == 0 || n_nonmembers == 0 {
            return Err(Error::InvalidArgument(
                "attack needs at least one member and one non-member".into(),
            ));
        }
        let tpr = member_hits as f64 / n_members as f64;
        let fpr = nonmember_hits as f64 / n_nonmembers as f64;
        Ok(Self {
            tpr,
            fpr,
            advantage: advantage(tpr, fpr)?,
            n_members,
            n_nonmembers,
        })
    }
}
