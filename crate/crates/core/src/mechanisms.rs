//! Laplace noise and the three stage-specific ways of spending a budget:
//! input perturbation, noisy clipped SGD steps, and perturbed Naive Bayes
//! statistics.

use ndarray::Array2;
use rand::distr::Open01;
use rand::Rng;

use crate::budget::check_epsilon;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Smallest scale used when a declared feature range is zero.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Slack allowed when checking that a gradient respects its clip bound.
pub const CLIP_SLACK: f64 = 1e-9;

/// Scale parameter of a zero-mean Laplace distribution.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(Self(beta))
        } else {
            Err(Error::InvalidArgument(format!(
                "Laplace scale must be positive and finite, got {beta}"
            )))
        }
    }

    pub fn beta(self) -> f64 {
        self.0
    }
}

/// Inverse CDF of `Lap(0, beta)` at `u` in `(0, 1)`.
pub fn laplace_inverse_cdf(beta: f64, u: f64) -> f64 {
    let v = u - 0.5;
    -beta * v.signum() * (1.0 - 2.0 * v.abs()).ln()
}

/// CDF of `Lap(0, beta)`.
pub fn laplace_cdf(beta: f64, x: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / beta).exp()
    } else {
        1.0 - 0.5 * (-x / beta).exp()
    }
}

/// One draw from `Lap(0, beta)`. Consumes exactly one uniform from `rng`.
pub fn laplace_sample(scale: LaplaceScale, rng: &mut SeededRng) -> f64 {
    let u: f64 = rng.sample(Open01);
    laplace_inverse_cdf(scale.0, u)
}

/// Per-feature scale for input perturbation: the feature's range divided by
/// its even share `epsilon / p` of the budget.
pub fn s1_scale(feature_range: f64, epsilon: f64, p: usize) -> Result<LaplaceScale> {
    check_epsilon(epsilon)?;
    if p == 0 {
        return Err(Error::InvalidArgument("feature count must be positive".into()));
    }
    if !(feature_range >= 0.0 && feature_range.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "feature range must be finite and non-negative, got {feature_range}"
        )));
    }
    LaplaceScale::new((feature_range * p as f64 / epsilon).max(SCALE_FLOOR))
}

/// Add independent Laplace noise to every feature of every training row.
///
/// Labels are untouched and values are not clipped back into range.
pub fn perturb_dataset_s1(
    train: &LabeledDataset,
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<LabeledDataset> {
    let p = train.n_features();
    let scales: Vec<LaplaceScale> = (0..p)
        .map(|j| s1_scale(train.range_width(j), epsilon, p))
        .collect::<Result<_>>()?;
    let mut noisy: Array2<f64> = train.features().clone();
    for mut row in noisy.rows_mut() {
        for (v, &scale) in row.iter_mut().zip(&scales) {
            *v += laplace_sample(scale, rng);
        }
    }
    train.with_perturbed_features(noisy)
}

/// Noise accounting for DP-SGD with L1 clipping and Laplace noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdNoiseConfig {
    clip_norm: f64,
    epsilon_total: f64,
    n_batches_total: usize,
    batch_size: usize,
}

impl SgdNoiseConfig {
    pub fn new(clip_norm: f64, epsilon_total: f64, n_batches_total: usize, batch_size: usize) -> Result<Self> {
        check_epsilon(epsilon_total)?;
        if !(clip_norm > 0.0 && clip_norm.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "clip norm must be positive, got {clip_norm}"
            )));
        }
        if n_batches_total == 0 || batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch count and batch size must be positive".into(),
            ));
        }
        Ok(Self {
            clip_norm,
            epsilon_total,
            n_batches_total,
            batch_size,
        })
    }

    pub fn clip_norm(&self) -> f64 {
        self.clip_norm
    }

    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }

    pub fn n_batches_total(&self) -> usize {
        self.n_batches_total
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Laplace scale of the per-coordinate noise on a clipped gradient sum.
    pub fn noise_scale(&self) -> Result<LaplaceScale> {
        LaplaceScale::new(self.clip_norm / per_batch_epsilon(self))
    }
}

/// Budget spent by each batch under sequential composition over the whole run.
pub fn per_batch_epsilon(cfg: &SgdNoiseConfig) -> f64 {
    cfg.epsilon_total / cfg.n_batches_total as f64
}

/// Scale `grad` in place so its L1 norm is at most `clip_norm`. Returns the
/// factor applied.
pub fn clip_l1(grad: &mut [f64], clip_norm: f64) -> f64 {
    let norm: f64 = grad.iter().map(|g| g.abs()).sum();
    let factor = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    if factor < 1.0 {
        grad.iter_mut().for_each(|g| *g *= factor);
    }
    factor
}

/// One noisy step: `params -= lr * (summed_clipped_grad + noise) / batch_len`.
///
/// `summed_clipped_grad` is the sum of `batch_len` per-example gradients, each
/// already clipped to L1 norm `clip_norm`. Adding or removing one example moves
/// that sum by at most `clip_norm` in L1, which sets the per-coordinate scale
/// `clip_norm / per_batch_epsilon`.
pub fn dp_sgd_update(
    params: &mut [f64],
    summed_clipped_grad: &[f64],
    learning_rate: f64,
    batch_len: usize,
    cfg: &SgdNoiseConfig,
    rng: &mut SeededRng,
) -> Result<()> {
    if params.len() != summed_clipped_grad.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            summed_clipped_grad.len()
        )));
    }
    if batch_len == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let norm: f64 = summed_clipped_grad.iter().map(|g| g.abs()).sum();
    let bound = cfg.clip_norm * batch_len as f64;
    if norm > bound + CLIP_SLACK {
        return Err(Error::UnclippedGradient { norm, bound });
    }
    let scale = cfg.noise_scale()?;
    let step = learning_rate / batch_len as f64;
    for (p, g) in params.iter_mut().zip(summed_clipped_grad) {
        *p -= step * (g + laplace_sample(scale, rng));
    }
    Ok(())
}

/// Noise sensitivities for one class's per-feature Gaussian statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NbSensitivity {
    pub s_mu: f64,
    pub s_sigma: f64,
    /// Budget given to each perturbed statistic.
    pub epsilon_share: f64,
}

impl NbSensitivity {
    pub fn mean_scale(&self) -> Result<LaplaceScale> {
        LaplaceScale::new((self.s_mu / self.epsilon_share).max(SCALE_FLOOR))
    }

    pub fn std_scale(&self) -> Result<LaplaceScale> {
        LaplaceScale::new((self.s_sigma / self.epsilon_share).max(SCALE_FLOOR))
    }
}

/// Sensitivities of a class mean and population standard deviation over
/// `n_class` records bounded in a range of width `feature_range`:
/// `range / (n + 1)` and `sqrt(n) * range / (n + 1)`. The budget is split
/// evenly over the `2p` statistics of the class.
pub fn nb_sensitivities(n_class: usize, feature_range: f64, epsilon: f64, p: usize) -> Result<NbSensitivity> {
    check_epsilon(epsilon)?;
    if n_class < 2 {
        return Err(Error::SparseClass {
            class: usize::MAX,
            count: n_class,
        });
    }
    if p == 0 {
        return Err(Error::InvalidArgument("feature count must be positive".into()));
    }
    if !(feature_range >= 0.0 && feature_range.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "feature range must be finite and non-negative, got {feature_range}"
        )));
    }
    let n = n_class as f64;
    Ok(NbSensitivity {
        s_mu: (feature_range / (n + 1.0)).max(SCALE_FLOOR),
        s_sigma: (n.sqrt() * feature_range / (n + 1.0)).max(SCALE_FLOOR),
        epsilon_share: epsilon / (2 * p) as f64,
    })
}
