use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::budget::Stage;
use crate::error::{Error, Result};
use crate::harness::{Method, TrialRecord};

/// Curves whose consecutive means never move by this much have no inflection.
pub const FLAT_DELTA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Acl,
    SalemMi,
    YeomMi,
    YeomAi,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Acl, Metric::SalemMi, Metric::YeomMi, Metric::YeomAi];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Acl => "acl",
            Metric::SalemMi => "salem_mi",
            Metric::YeomMi => "yeom_mi",
            Metric::YeomAi => "yeom_ai",
        }
    }

    pub fn value(self, r: &TrialRecord) -> f64 {
        match self {
            Metric::Acl => r.acl,
            Metric::SalemMi => r.salem_mi_adv,
            Metric::YeomMi => r.yeom_mi_adv,
            Metric::YeomAi => r.yeom_ai_mean_adv,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == norm || m.as_str().replace('_', "") == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub mean: f64,
    /// Sample standard deviation across repetitions (0 for one repetition).
    pub std: f64,
    pub n: usize,
}

/// One metric against ε for one (dataset, method), ascending in ε.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricCurve {
    pub dataset: String,
    pub method: Method,
    pub metric: Metric,
    pub points: Vec<CurvePoint>,
}

impl MetricCurve {
    pub fn stage(&self) -> Stage {
        self.method.stage()
    }
}

/// Group private records by (dataset, method) and summarize each metric per ε.
/// Baseline rows are skipped.
pub fn aggregate(records: &[TrialRecord]) -> Result<Vec<MetricCurve>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to aggregate".into()));
    }
    // positive finite f64 bit patterns sort like the values
    let mut groups: BTreeMap<(String, Method, Metric), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for r in records {
        let Some(eps) = r.epsilon else { continue };
        for metric in Metric::ALL {
            groups
                .entry((r.dataset.clone(), r.method, metric))
                .or_default()
                .entry(eps.to_bits())
                .or_default()
                .push(metric.value(r));
        }
    }
    Ok(groups
        .into_iter()
        .map(|((dataset, method, metric), by_eps)| MetricCurve {
            dataset,
            method,
            metric,
            points: by_eps
                .into_iter()
                .map(|(bits, values)| summarize(f64::from_bits(bits), &values))
                .collect(),
        })
        .collect())
}

fn summarize(epsilon: f64, values: &[f64]) -> CurvePoint {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    CurvePoint { epsilon, mean, std, n }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inflection {
    /// Geometric mean of the two grid points bracketing the steepest segment.
    At(f64),
    /// No consecutive change reaches [`FLAT_DELTA`].
    Flat,
}

/// Locate the steepest segment of the curve in log10 ε.
/// Ties resolve to the segment with the smaller ε.
pub fn find_inflection(curve: &MetricCurve) -> Result<Inflection> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            available: pts.len(),
        });
    }
    if pts.windows(2).all(|w| (w[1].mean - w[0].mean).abs() < FLAT_DELTA) {
        return Ok(Inflection::Flat);
    }
    let mut best: Option<(f64, usize)> = None;
    for (i, w) in pts.windows(2).enumerate() {
        let slope = ((w[1].mean - w[0].mean) / (w[1].epsilon.log10() - w[0].epsilon.log10())).abs();
        if best.is_none_or(|(s, _)| slope > s) {
            best = Some((slope, i));
        }
    }
    let i = best.expect("at least two segments").1;
    Ok(Inflection::At((pts[i].epsilon * pts[i + 1].epsilon).sqrt()))
}
