use std::path::Path;

use super::config::Method;
use super::trial::TrialRecord;
use crate::budget::Stage;
use crate::error::{Error, Result};

pub const RESULTS_HEADER: [&str; 16] = [
    "dataset",
    "n_classes",
    "method",
    "stage",
    "epsilon",
    "rep",
    "accuracy",
    "baseline_accuracy",
    "acl",
    "salem_mi_adv",
    "yeom_mi_adv",
    "yeom_ai_mean_adv",
    "yeom_ai_std",
    "salem_ai_mean_adv",
    "wall_time_s",
    "seed",
];

// 17 significant digits round-trips every f64
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write records in the order given. Baseline epsilon is written as `inf`.
pub fn write_results(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.n_classes.to_string(),
            r.method.to_string(),
            r.stage.to_string(),
            r.epsilon.map_or_else(|| "inf".to_string(), float),
            r.rep.to_string(),
            float(r.accuracy),
            float(r.baseline_accuracy),
            float(r.acl),
            float(r.salem_mi_adv),
            float(r.yeom_mi_adv),
            float(r.yeom_ai_mean_adv),
            float(r.yeom_ai_std),
            float(r.salem_ai_mean_adv),
            float(r.wall_time_s),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cell<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.trim().parse().map_err(|_| Error::Schema {
        column: RESULTS_HEADER[i].to_string(),
        reason: format!("cannot parse {raw:?} on line {}", rec.position().map_or(0, |p| p.line())),
    })
}

/// Read a results file written by [`write_results`]. Any header or cell
/// problem is reported against the offending column.
pub fn read_results(path: &Path) -> Result<Vec<TrialRecord>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = r.headers()?.clone();
    for (i, want) in RESULTS_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(got) if got.trim() == *want => {}
            Some(got) => {
                return Err(Error::Schema {
                    column: want.to_string(),
                    reason: format!("expected column {want:?} at position {i}, found {got:?}"),
                })
            }
            None => {
                return Err(Error::Schema {
                    column: want.to_string(),
                    reason: "column missing".into(),
                })
            }
        }
    }
    if let Some(extra) = header.get(RESULTS_HEADER.len()) {
        return Err(Error::Schema {
            column: extra.to_string(),
            reason: "unexpected column".into(),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != RESULTS_HEADER.len() {
            let column = RESULTS_HEADER.get(rec.len()).unwrap_or(&"seed");
            return Err(Error::Schema {
                column: column.to_string(),
                reason: format!("row has {} fields, expected {}", rec.len(), RESULTS_HEADER.len()),
            });
        }
        let eps: f64 = cell(&rec, 4)?;
        if !(eps > 0.0) {
            return Err(Error::Schema {
                column: "epsilon".into(),
                reason: format!("epsilon must be positive, got {eps}"),
            });
        }
        out.push(TrialRecord {
            dataset: rec[0].to_string(),
            n_classes: cell(&rec, 1)?,
            method: cell::<Method>(&rec, 2)?,
            stage: cell::<Stage>(&rec, 3)?,
            epsilon: eps.is_finite().then_some(eps),
            rep: cell(&rec, 5)?,
            accuracy: cell(&rec, 6)?,
            baseline_accuracy: cell(&rec, 7)?,
            acl: cell(&rec, 8)?,
            salem_mi_adv: cell(&rec, 9)?,
            yeom_mi_adv: cell(&rec, 10)?,
            yeom_ai_mean_adv: cell(&rec, 11)?,
            yeom_ai_std: cell(&rec, 12)?,
            salem_ai_mean_adv: cell(&rec, 13)?,
            wall_time_s: cell(&rec, 14)?,
            seed: cell(&rec, 15)?,
        });
    }
    Ok(out)
}
