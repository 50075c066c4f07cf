//! Attribute inference: the adversary knows every feature but one and
//! searches over a binned candidate set for the missing value.

use ndarray::Array2;
use rand::seq::index;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::{confidence, loss_from_probability, one_row, AttributeProbe, PredictiveModel};
use crate::rng::SeededRng;

pub const MAX_BINS: usize = 10;

/// Candidate values for one protected attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeBinning {
    pub attribute_index: usize,
    /// Interior bin boundaries, strictly increasing; `n_bins - 1` of them.
    pub bin_edges: Vec<f64>,
    /// Value substituted for each bin, ascending.
    pub candidate_values: Vec<f64>,
}

impl AttributeBinning {
    pub fn n_bins(&self) -> usize {
        self.candidate_values.len()
    }

    /// Bin holding `value`; left-closed bins, clamped at both ends.
    pub fn bin_of(&self, value: f64) -> usize {
        self.bin_edges.partition_point(|&e| e <= value)
    }
}

/// Exact values when the column has at most ten distinct entries, otherwise
/// ten equal-width bins over the declared range with their centers.
pub fn make_binning(train: &LabeledDataset, attribute_index: usize) -> Result<AttributeBinning> {
    if attribute_index >= train.n_features() {
        return Err(Error::InvalidArgument(format!(
            "attribute {attribute_index} out of range for {} features",
            train.n_features()
        )));
    }
    let mut uniques: Vec<f64> = Vec::new();
    for &v in train.features().column(attribute_index) {
        if let Err(pos) = uniques.binary_search_by(|u| u.total_cmp(&v)) {
            uniques.insert(pos, v);
            if uniques.len() > MAX_BINS {
                break;
            }
        }
    }
    if uniques.len() <= MAX_BINS {
        let bin_edges = uniques.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        return Ok(AttributeBinning {
            attribute_index,
            bin_edges,
            candidate_values: uniques,
        });
    }
    let (lo, hi) = train.feature_ranges()[attribute_index];
    let width = (hi - lo) / MAX_BINS as f64;
    Ok(AttributeBinning {
        attribute_index,
        bin_edges: (1..MAX_BINS).map(|i| lo + width * i as f64).collect(),
        candidate_values: (0..MAX_BINS).map(|i| lo + width * (i as f64 + 0.5)).collect(),
    })
}

/// Index of the first strictly best score.
fn first_best(scores: impl Iterator<Item = f64>, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.enumerate() {
        if best.is_none_or(|(_, b)| better(s, b)) {
            best = Some((i, s));
        }
    }
    best.map_or(0, |(i, _)| i)
}

/// Per-row candidate bin whose loss is closest to the training loss.
pub fn yeom_ai_guesses(
    model: &(impl PredictiveModel + ?Sized),
    features: &Array2<f64>,
    labels: &[usize],
    binning: &AttributeBinning,
) -> Result<Vec<usize>> {
    let train_loss = model
        .training_loss()
        .ok_or_else(|| Error::InvalidArgument("model has no recorded training loss".into()))?;
    if let Some(&label) = labels.iter().find(|&&l| l >= model.n_classes()) {
        return Err(Error::InvalidLabel {
            label,
            n_classes: model.n_classes(),
        });
    }
    let gaps = candidate_scores(model, features, binning, |proba, i| {
        (loss_from_probability(proba[[i, labels[i]]]) - train_loss).abs()
    });
    Ok(pick(&gaps, features.nrows(), |s, b| s < b))
}

/// Per-row candidate bin with the highest top-class probability.
pub fn salem_ai_guesses(
    model: &(impl PredictiveModel + ?Sized),
    features: &Array2<f64>,
    binning: &AttributeBinning,
) -> Vec<usize> {
    let conf = candidate_scores(model, features, binning, |proba, i| confidence(proba.row(i)));
    pick(&conf, features.nrows(), |s, b| s > b)
}

/// `scores[c][i]`: score of candidate `c` for row `i`.
fn candidate_scores(
    model: &(impl PredictiveModel + ?Sized),
    features: &Array2<f64>,
    binning: &AttributeBinning,
    score: impl Fn(&Array2<f64>, usize) -> f64,
) -> Vec<Vec<f64>> {
    let probe = model.attribute_probe(features);
    binning
        .candidate_values
        .iter()
        .map(|&v| {
            let proba = probe.proba_with(binning.attribute_index, v);
            (0..features.nrows()).map(|i| score(&proba, i)).collect()
        })
        .collect()
}

fn pick(scores: &[Vec<f64>], n_rows: usize, better: impl Fn(f64, f64) -> bool + Copy) -> Vec<usize> {
    (0..n_rows)
        .map(|i| first_best(scores.iter().map(|c| c[i]), better))
        .collect()
}

/// Candidate value whose loss is closest to the model's training loss.
/// Ties go to the smallest candidate.
pub fn yeom_ai_guess(
    model: &(impl PredictiveModel + ?Sized),
    x: &[f64],
    true_label: usize,
    binning: &AttributeBinning,
) -> Result<f64> {
    let guess = yeom_ai_guesses(model, &one_row(x), &[true_label], binning)?[0];
    Ok(binning.candidate_values[guess])
}

/// Candidate value giving the most confident prediction. Ties go to the
/// smallest candidate.
pub fn salem_ai_guess(model: &(impl PredictiveModel + ?Sized), x: &[f64], binning: &AttributeBinning) -> f64 {
    let guess = salem_ai_guesses(model, &one_row(x), binning)[0];
    binning.candidate_values[guess]
}

/// Advantage of one attribute attack across several protected attributes.
#[derive(Clone, Debug, PartialEq)]
pub struct AiSummary {
    pub mean: f64,
    /// Sample standard deviation over attributes (0 for a single attribute).
    pub std: f64,
    /// `(attribute index, advantage)`, ordered by attribute index.
    pub per_attribute: Vec<(usize, f64)>,
}

impl AiSummary {
    fn from_per_attribute(per_attribute: Vec<(usize, f64)>) -> Self {
        let n = per_attribute.len() as f64;
        let mean = per_attribute.iter().map(|a| a.1).sum::<f64>() / n;
        let std = if per_attribute.len() > 1 {
            (per_attribute.iter().map(|a| (a.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            per_attribute,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AiReport {
    pub yeom: AiSummary,
    pub salem: AiSummary,
}

fn success_rate(guesses: &[usize], data: &LabeledDataset, binning: &AttributeBinning) -> f64 {
    let col = data.features().column(binning.attribute_index);
    let hits = guesses
        .iter()
        .zip(col.iter())
        .filter(|(&g, &v)| g == binning.bin_of(v))
        .count();
    hits as f64 / guesses.len() as f64
}

/// Run both attribute attacks on `n_attributes` columns drawn without
/// replacement. Per attribute, advantage is the member success rate minus
/// the non-member success rate, where success means guessing the bin of the
/// true value. Bins are built from `members`.
pub fn ai_advantage(
    model: &(impl PredictiveModel + ?Sized),
    members: &LabeledDataset,
    nonmembers: &LabeledDataset,
    n_attributes: usize,
    rng: &mut SeededRng,
) -> Result<AiReport> {
    let p = members.n_features();
    if n_attributes == 0 || n_attributes > p {
        return Err(Error::InvalidArgument(format!(
            "cannot protect {n_attributes} of {p} attributes"
        )));
    }
    if nonmembers.n_features() != p {
        return Err(Error::WidthMismatch {
            expected: p,
            got: nonmembers.n_features(),
        });
    }
    let mut attrs = index::sample(rng, p, n_attributes).into_vec();
    attrs.sort_unstable();

    let train_loss = model
        .training_loss()
        .ok_or_else(|| Error::InvalidArgument("model has no recorded training loss".into()))?;
    for ds in [members, nonmembers] {
        if let Some(&label) = ds.labels().iter().find(|&&l| l >= model.n_classes()) {
            return Err(Error::InvalidLabel {
                label,
                n_classes: model.n_classes(),
            });
        }
    }
    let member_probe = model.attribute_probe(members.features());
    let nonmember_probe = model.attribute_probe(nonmembers.features());

    let mut yeom = Vec::with_capacity(attrs.len());
    let mut salem = Vec::with_capacity(attrs.len());
    for &a in &attrs {
        let binning = make_binning(members, a)?;
        // one forward pass per candidate serves both attacks
        let rates = |data: &LabeledDataset, probe: &dyn AttributeProbe| -> (f64, f64) {
            let n = data.n_rows();
            let mut gaps = Vec::with_capacity(binning.n_bins());
            let mut conf = Vec::with_capacity(binning.n_bins());
            for &v in &binning.candidate_values {
                let proba = probe.proba_with(a, v);
                gaps.push(
                    (0..n)
                        .map(|i| (loss_from_probability(proba[[i, data.labels()[i]]]) - train_loss).abs())
                        .collect::<Vec<_>>(),
                );
                conf.push((0..n).map(|i| confidence(proba.row(i))).collect::<Vec<_>>());
            }
            let y = pick(&gaps, n, |s, b| s < b);
            let s = pick(&conf, n, |s, b| s > b);
            (success_rate(&y, data, &binning), success_rate(&s, data, &binning))
        };
        let (ym, sm) = rates(members, member_probe.as_ref());
        let (yn, sn) = rates(nonmembers, nonmember_probe.as_ref());
        yeom.push((a, ym - yn));
        salem.push((a, sm - sn));
    }
    Ok(AiReport {
        yeom: AiSummary::from_per_attribute(yeom),
        salem: AiSummary::from_per_attribute(salem),
    })
}
