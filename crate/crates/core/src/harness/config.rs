use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::budget::Stage;
use crate::data::LabelColumn;
use crate::error::{Error, Result};
use crate::models::MlpHyper;

pub const PAPER_EPSILON_GRID: [f64; 11] = [0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0, 1000.0];

/// Model family plus the stage its budget is spent at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "S1-GNB")]
    S1Gnb,
    #[serde(rename = "S1-MLP")]
    S1Mlp,
    #[serde(rename = "S2-MLP")]
    S2Mlp,
    #[serde(rename = "S3-GNB")]
    S3Gnb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Gnb,
    Mlp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::S1Gnb, Method::S1Mlp, Method::S2Mlp, Method::S3Gnb];

    pub fn stage(self) -> Stage {
        match self {
            Method::S1Gnb | Method::S1Mlp => Stage::S1,
            Method::S2Mlp => Stage::S2,
            Method::S3Gnb => Stage::S3,
        }
    }

    pub fn model_kind(self) -> ModelKind {
        match self {
            Method::S1Gnb | Method::S3Gnb => ModelKind::Gnb,
            Method::S1Mlp | Method::S2Mlp => ModelKind::Mlp,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::S1Gnb => "S1-GNB",
            Method::S1Mlp => "S1-MLP",
            Method::S2Mlp => "S2-MLP",
            Method::S3Gnb => "S3-GNB",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Where the vectors come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Uniform vectors in `[0, 1]^p`, labeled by k-means at each `k`.
    Synthetic {
        name: String,
        n: usize,
        p: usize,
        k_values: Vec<usize>,
    },
    /// A numeric CSV, min-max normalized. With a non-empty `k_values` the
    /// rows are relabeled by k-means; otherwise `label_column` supplies labels.
    Csv {
        name: String,
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        label_column: Option<LabelColumn>,
        #[serde(default)]
        k_values: Vec<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    /// 2k/2k splits and 20 MLP epochs: runs on one workstation.
    Desk,
    /// 10k/10k splits over 100k synthetic vectors.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile {other:?}, expected desk or paper"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub methods: Vec<Method>,
    pub epsilon_grid: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_repetitions: usize,
    pub n_protected_attributes: usize,
    /// Size of each half of the disjoint reference split used to calibrate
    /// the confidence threshold.
    pub reference_size: usize,
    pub master_seed: u64,
    /// When false, `wall_time_s` is written as 0 so repeated runs are byte-identical.
    pub record_wall_time: bool,
    /// L1 bound on each per-example gradient in DP-SGD.
    pub clip_norm: f64,
    pub mlp: MlpHyper,
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self {
                dataset: DatasetSpec::Synthetic {
                    name: "synthetic".into(),
                    n: 10_000,
                    p: 50,
                    k_values: vec![10],
                },
                methods: Method::ALL.to_vec(),
                epsilon_grid: PAPER_EPSILON_GRID.to_vec(),
                n_train: 2_000,
                n_test: 2_000,
                n_repetitions: 5,
                n_protected_attributes: 20,
                reference_size: 1_000,
                master_seed: 0,
                record_wall_time: true,
                clip_norm: 100.0,
                mlp: MlpHyper {
                    epochs: 20,
                    ..MlpHyper::default()
                },
            },
            Profile::Paper => Self {
                dataset: DatasetSpec::Synthetic {
                    name: "synthetic".into(),
                    n: 100_000,
                    p: 50,
                    k_values: vec![2, 5, 10, 20, 50, 100, 200],
                },
                n_train: 10_000,
                n_test: 10_000,
                mlp: MlpHyper::default(),
                ..Self::for_profile(Profile::Desk)
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.epsilon_grid.is_empty() {
            return Err(Error::Config("epsilon grid is empty".into()));
        }
        if self.epsilon_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Config("epsilon grid values must be positive and finite".into()));
        }
        if self.epsilon_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("epsilon grid must be strictly ascending".into()));
        }
        for (name, v) in [
            ("n_train", self.n_train),
            ("n_test", self.n_test),
            ("n_repetitions", self.n_repetitions),
            ("n_protected_attributes", self.n_protected_attributes),
            ("reference_size", self.reference_size),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        let ks = match &self.dataset {
            DatasetSpec::Synthetic { n, p, k_values, .. } => {
                if *n == 0 || *p == 0 || k_values.is_empty() {
                    return Err(Error::Config("synthetic data needs n, p and at least one k".into()));
                }
                k_values
            }
            DatasetSpec::Csv { k_values, label_column, .. } => {
                if k_values.is_empty() && label_column.is_none() {
                    return Err(Error::Config("CSV data needs k_values or a label_column".into()));
                }
                k_values
            }
        };
        if ks.iter().any(|&k| k < 2) {
            return Err(Error::Config("every k must be at least 2".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if key != "dataset" => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Read a TOML config over the profile defaults. Keys absent from the file
/// keep the profile value; unknown keys are rejected. A `[dataset]` table
/// replaces the default dataset whole. CSV datasets default to 10 repetitions.
pub fn load_config(path: Option<&Path>, profile: Profile) -> Result<ExperimentConfig> {
    let defaults = ExperimentConfig::for_profile(profile);
    let Some(path) = path else {
        return Ok(defaults);
    };
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, profile)
}

pub(crate) fn parse_config(text: &str, profile: Profile) -> Result<ExperimentConfig> {
    let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let explicit_reps = overlay.contains_key("n_repetitions");
    let mut base = toml::Table::try_from(ExperimentConfig::for_profile(profile))
        .map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut base, overlay);
    let mut cfg: ExperimentConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if !explicit_reps && matches!(cfg.dataset, DatasetSpec::Csv { .. }) {
        cfg.n_repetitions = 10;
    }
    cfg.validate()?;
    Ok(cfg)
}
