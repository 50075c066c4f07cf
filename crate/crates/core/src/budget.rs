use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pipeline position at which noise is injected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    /// Input data perturbation.
    S1,
    /// Noisy gradient updates during training.
    S2,
    /// Perturbation of learned parameters.
    S3,
    /// Non-private baseline.
    None,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::S1 => "S1",
            Stage::S2 => "S2",
            Stage::S3 => "S3",
            Stage::None => "None",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" => Ok(Stage::S1),
            "S2" => Ok(Stage::S2),
            "S3" => Ok(Stage::S3),
            "None" => Ok(Stage::None),
            other => Err(Error::InvalidArgument(format!("unknown stage {other:?}"))),
        }
    }
}

/// A privacy budget and where it is spent. The non-private baseline has no
/// epsilon at all rather than an infinite one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyBudget {
    stage: Stage,
    epsilon: Option<f64>,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, stage: Stage) -> Result<Self> {
        if stage == Stage::None {
            return Err(Error::InvalidArgument(
                "use PrivacyBudget::non_private for the baseline".into(),
            ));
        }
        check_epsilon(epsilon)?;
        Ok(Self {
            stage,
            epsilon: Some(epsilon),
        })
    }

    pub fn non_private() -> Self {
        Self {
            stage: Stage::None,
            epsilon: None,
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// `None` for the non-private baseline.
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn is_private(&self) -> bool {
        self.epsilon.is_some()
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )))
    }
}
