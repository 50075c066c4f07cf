//! Differentially private classifiers, the attacks used to probe them, and
//! the experiment harness that measures the accuracy/privacy trade-off
//! across ε.
//!
//! Three places can spend a pure ε-DP budget:
//!
//! * `S1`: Laplace noise on every training feature before fitting.
//! * `S2`: DP-SGD with L1 clipping and Laplace gradient noise.
//! * `S3`: Laplace noise on Gaussian naive Bayes sufficient statistics.

pub mod analysis;
pub mod attacks;
pub mod budget;
pub mod data;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod metrics;
pub mod models;
pub mod rng;

pub use budget::{PrivacyBudget, Stage};
pub use dataset::LabeledDataset;
pub use error::{Error, Result};
pub use rng::SeededRng;
