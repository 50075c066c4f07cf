//! JSON model files.
//!
//! ```json
//! {
//!   "kind": "gnb",
//!   "privacy": { "stage": "S3", "epsilon": 1.0 },
//!   "training_loss": 0.41,
//!   "class_priors": [0.5, 0.5],
//!   "means": [[...], [...]],          // k rows of p values
//!   "stds":  [[...], [...]]
//! }
//! {
//!   "kind": "mlp",
//!   "privacy": { "stage": "None", "epsilon": null },
//!   "training_loss": 0.12,
//!   "architecture": [50, 128, 10],    // layer widths, input first
//!   "activation": "tanh",
//!   "layers": [ { "weights": [[...]], "bias": [...] }, ... ]   // weights are in x out
//! }
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, AttributeProbe, GnbModel, Layer, MlpModel, PredictiveModel};
use crate::budget::{PrivacyBudget, Stage};
use crate::error::{Error, Result};

/// Either trained classifier.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Gnb(GnbModel),
    Mlp(MlpModel),
}

impl AnyModel {
    fn inner(&self) -> &dyn PredictiveModel {
        match self {
            AnyModel::Gnb(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }
}

impl PredictiveModel for AnyModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn proba(&self, x: &Array2<f64>) -> Array2<f64> {
        self.inner().proba(x)
    }

    fn training_loss(&self) -> Option<f64> {
        self.inner().training_loss()
    }

    fn privacy(&self) -> PrivacyBudget {
        self.inner().privacy()
    }

    fn attribute_probe<'a>(&'a self, x: &'a Array2<f64>) -> Box<dyn AttributeProbe + 'a> {
        match self {
            AnyModel::Gnb(m) => m.attribute_probe(x),
            AnyModel::Mlp(m) => m.attribute_probe(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrivacyRecord {
    stage: Stage,
    epsilon: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ModelFile {
    Gnb {
        privacy: PrivacyRecord,
        training_loss: f64,
        class_priors: Vec<f64>,
        means: Vec<Vec<f64>>,
        stds: Vec<Vec<f64>>,
    },
    Mlp {
        privacy: PrivacyRecord,
        training_loss: Option<f64>,
        architecture: Vec<usize>,
        activation: Activation,
        layers: Vec<LayerRecord>,
    },
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> Result<Array2<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("ragged matrix in model file".into()));
    }
    Array2::from_shape_vec((n, p), rows.concat()).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn privacy_record(b: PrivacyBudget) -> PrivacyRecord {
    PrivacyRecord {
        stage: b.stage(),
        epsilon: b.epsilon(),
    }
}

fn budget(r: PrivacyRecord) -> Result<PrivacyBudget> {
    match (r.stage, r.epsilon) {
        (Stage::None, None) => Ok(PrivacyBudget::non_private()),
        (Stage::None, Some(_)) => Err(Error::InvalidArgument("stage None carries no epsilon".into())),
        (stage, Some(eps)) => PrivacyBudget::new(eps, stage),
        (stage, None) => Err(Error::InvalidArgument(format!("stage {stage} needs an epsilon"))),
    }
}

impl From<&AnyModel> for ModelFile {
    fn from(m: &AnyModel) -> Self {
        match m {
            AnyModel::Gnb(g) => ModelFile::Gnb {
                privacy: privacy_record(g.privacy()),
                training_loss: g.training_loss().unwrap_or(f64::NAN),
                class_priors: g.class_priors().to_vec(),
                means: rows(g.means()),
                stds: rows(g.stds()),
            },
            AnyModel::Mlp(n) => ModelFile::Mlp {
                privacy: privacy_record(n.privacy()),
                training_loss: n.training_loss(),
                architecture: n.architecture(),
                activation: n.activation(),
                layers: n
                    .layers()
                    .iter()
                    .map(|l| LayerRecord {
                        weights: rows(&l.weights),
                        bias: l.bias.to_vec(),
                    })
                    .collect(),
            },
        }
    }
}

impl TryFrom<ModelFile> for AnyModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        match f {
            ModelFile::Gnb {
                privacy,
                training_loss,
                class_priors,
                means,
                stds,
            } => Ok(AnyModel::Gnb(GnbModel::from_parts(
                class_priors,
                matrix(means)?,
                matrix(stds)?,
                budget(privacy)?,
                training_loss,
            )?)),
            ModelFile::Mlp {
                privacy,
                training_loss,
                architecture,
                activation,
                layers,
            } => {
                let layers = layers
                    .into_iter()
                    .map(|l| {
                        Ok(Layer {
                            weights: matrix(l.weights)?,
                            bias: Array1::from(l.bias),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let model = MlpModel::from_parts(layers, activation, training_loss.unwrap_or(f64::NAN), budget(privacy)?)?;
                if model.architecture() != architecture {
                    return Err(Error::InvalidArgument(format!(
                        "architecture {architecture:?} does not match layers {:?}",
                        model.architecture()
                    )));
                }
                Ok(AnyModel::Mlp(model))
            }
        }
    }
}

pub fn save_model(model: &AnyModel, path: &Path) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, &ModelFile::from(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    AnyModel::try_from(file)
}
