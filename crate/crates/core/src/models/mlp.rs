//! Fully connected softmax classifier trained by minibatch SGD, with an
//! optional DP-SGD path (per-example L1 clipping plus Laplace noise).

use ndarray::{Array1, Array2, Axis, Zip};
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{softmax_rows, AttributeProbe, PredictiveModel, PROB_FLOOR};
use crate::budget::{PrivacyBudget, Stage};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::mechanisms::{dp_sgd_update, SgdNoiseConfig};
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Tanh => z.mapv_inplace(fast_tanh),
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

// libm tanh dominates attack time; this form is within a few ulps away from 0
fn fast_tanh(x: f64) -> f64 {
    if x.abs() < 0.02 {
        return x.tanh();
    }
    let e = (2.0 * x).exp();
    1.0 - 2.0 / (e + 1.0)
}

/// Architecture and optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpHyper {
    fn default() -> Self {
        Self {
            hidden: vec![128],
            activation: Activation::Tanh,
            learning_rate: 0.5,
            epochs: 50,
            batch_size: 200,
        }
    }
}

impl MlpHyper {
    fn validate(&self) -> Result<()> {
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidArgument("hidden layers must be non-empty".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Dense layer mapping `in -> out`; `weights` is `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    activation: Activation,
    training_loss: f64,
    privacy: PrivacyBudget,
}

impl MlpModel {
    pub(crate) fn from_parts(
        layers: Vec<Layer>,
        activation: Activation,
        training_loss: f64,
        privacy: PrivacyBudget,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("MLP needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].weights.ncols() != w[1].weights.nrows() {
                return Err(Error::InvalidArgument("MLP layer shapes do not chain".into()));
            }
        }
        for l in &layers {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::InvalidArgument("bias length does not match layer width".into()));
            }
        }
        if layers.last().map(|l| l.weights.ncols()).unwrap_or(0) < 2 {
            return Err(Error::InvalidArgument("output layer needs at least 2 classes".into()));
        }
        Ok(Self {
            layers,
            activation,
            training_loss,
            privacy,
        })
    }

    /// Tag the model with the budget that was spent on its inputs.
    pub fn with_privacy(mut self, privacy: PrivacyBudget) -> Self {
        self.privacy = privacy;
        self
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Layer widths from input to output.
    pub fn architecture(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.nrows()];
        sizes.extend(self.layers.iter().map(|l| l.weights.ncols()));
        sizes
    }

    fn init(sizes: &[usize], activation: Activation, rng: &mut SeededRng) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || dist.sample(rng)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self {
            layers,
            activation,
            training_loss: f64::NAN,
            privacy: PrivacyBudget::non_private(),
        }
    }

    /// Activations of every layer, input first, softmax output last.
    fn forward(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        self.forward_from(0, x.dot(&self.layers[0].weights) + &self.layers[0].bias, &mut acts);
        acts
    }

    /// Continue a forward pass given the pre-activation of layer `idx`.
    fn forward_from(&self, idx: usize, mut z: Array2<f64>, acts: &mut Vec<Array2<f64>>) {
        let last = self.layers.len() - 1;
        for l in idx..=last {
            if l > idx {
                z = acts.last().expect("input pushed").dot(&self.layers[l].weights) + &self.layers[l].bias;
            }
            if l == last {
                softmax_rows(&mut z);
            } else {
                self.activation.apply(&mut z);
            }
            acts.push(std::mem::take(&mut z));
        }
    }

    fn output_from_first_preactivation(&self, z: Array2<f64>) -> Array2<f64> {
        let mut acts = Vec::with_capacity(self.layers.len());
        acts.push(Array2::zeros((0, 0)));
        self.forward_from(0, z, &mut acts);
        acts.pop().expect("output layer")
    }

    /// Per-layer error signals `dL/dz` for mean-free (summed) cross-entropy.
    fn backward(&self, acts: &[Array2<f64>], labels: &[usize]) -> Vec<Array2<f64>> {
        let n_layers = self.layers.len();
        let mut deltas = vec![Array2::zeros((0, 0)); n_layers];
        let mut delta = acts[n_layers].clone();
        for (i, &y) in labels.iter().enumerate() {
            delta[[i, y]] -= 1.0;
        }
        for l in (0..n_layers).rev() {
            let next = if l > 0 {
                let mut d = delta.dot(&self.layers[l].weights.t());
                let act = self.activation;
                Zip::from(&mut d)
                    .and(&acts[l])
                    .for_each(|d, &a| *d *= act.derivative_from_output(a));
                Some(d)
            } else {
                None
            };
            deltas[l] = delta;
            match next {
                Some(d) => delta = d,
                None => break,
            }
        }
        deltas
    }

    /// Gradient of the summed loss, with row `i` weighted by `scale[i]`.
    fn summed_gradient(&self, acts: &[Array2<f64>], deltas: &[Array2<f64>], scale: Option<&[f64]>) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        for (l, delta) in deltas.iter().enumerate() {
            let scaled;
            let d = match scale {
                Some(s) => {
                    let s = Array1::from(s.to_vec()).insert_axis(Axis(1));
                    scaled = delta * &s;
                    &scaled
                }
                None => delta,
            };
            let gw = acts[l].t().dot(d);
            flat.extend(gw.iter());
            flat.extend(d.sum_axis(Axis(0)).iter());
        }
        flat
    }

    /// L1 norm of each example's full parameter gradient. The weight gradient
    /// of one example is an outer product, whose L1 norm factorizes.
    fn per_example_l1(&self, acts: &[Array2<f64>], deltas: &[Array2<f64>]) -> Vec<f64> {
        let n = acts[0].nrows();
        let mut norms = vec![0.0; n];
        for (l, delta) in deltas.iter().enumerate() {
            for (i, norm) in norms.iter_mut().enumerate() {
                let a1: f64 = acts[l].row(i).iter().map(|v| v.abs()).sum();
                let d1: f64 = delta.row(i).iter().map(|v| v.abs()).sum();
                *norm += d1 * (a1 + 1.0);
            }
        }
        norms
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            v.extend(l.weights.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                flat.len()
            )));
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    fn apply_step(&mut self, grad: &[f64], step: f64) {
        let mut it = grad.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w -= step * it.next().expect("gradient matches parameters");
            }
        }
    }

    /// Mean cross-entropy over `(x, labels)` and its gradient with respect to
    /// [`params_flat`](Self::params_flat).
    pub fn loss_and_gradient(&self, x: &Array2<f64>, labels: &[usize]) -> (f64, Vec<f64>) {
        let acts = self.forward(x);
        let n = labels.len() as f64;
        let out = acts.last().expect("output");
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| -out[[i, y]].max(PROB_FLOOR).ln())
            .sum::<f64>()
            / n;
        let deltas = self.backward(&acts, labels);
        let grad = self.summed_gradient(&acts, &deltas, None).into_iter().map(|g| g / n).collect();
        (loss, grad)
    }
}

impl PredictiveModel for MlpModel {
    fn n_features(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    fn n_classes(&self) -> usize {
        self.layers.last().expect("non-empty").weights.ncols()
    }

    fn proba(&self, x: &Array2<f64>) -> Array2<f64> {
        self.output_from_first_preactivation(x.dot(&self.layers[0].weights) + &self.layers[0].bias)
    }

    fn training_loss(&self) -> Option<f64> {
        self.training_loss.is_finite().then_some(self.training_loss)
    }

    fn privacy(&self) -> PrivacyBudget {
        self.privacy
    }

    fn attribute_probe<'a>(&'a self, x: &'a Array2<f64>) -> Box<dyn AttributeProbe + 'a> {
        Box::new(MlpProbe {
            model: self,
            x,
            z1: x.dot(&self.layers[0].weights) + &self.layers[0].bias,
        })
    }
}

/// Reuses the first-layer pre-activation; a substitution only shifts it by a
/// rank-one term.
struct MlpProbe<'a> {
    model: &'a MlpModel,
    x: &'a Array2<f64>,
    z1: Array2<f64>,
}

impl AttributeProbe for MlpProbe<'_> {
    fn proba_with(&self, attr: usize, value: f64) -> Array2<f64> {
        let mut z = self.z1.clone();
        let w = self.model.layers[0].weights.row(attr);
        for (mut row, &old) in z.axis_iter_mut(Axis(0)).zip(self.x.column(attr)) {
            row.scaled_add(value - old, &w);
        }
        self.model.output_from_first_preactivation(z)
    }
}

struct DpSgd {
    cfg: SgdNoiseConfig,
    noise: SeededRng,
}

fn train(
    data: &LabeledDataset,
    hyper: &MlpHyper,
    rng: &SeededRng,
    mut dp: Option<DpSgd>,
    privacy: PrivacyBudget,
) -> Result<MlpModel> {
    hyper.validate()?;
    let mut sizes = vec![data.n_features()];
    sizes.extend(&hyper.hidden);
    sizes.push(data.n_classes());
    let mut model = MlpModel::init(&sizes, hyper.activation, &mut rng.derive("init"));
    let mut shuffle = rng.derive("shuffle");
    let x = data.features();
    let y = data.labels();
    let mut order: Vec<usize> = (0..data.n_rows()).collect();

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let acts = model.forward(&xb);
            let out = acts.last().expect("output");
            epoch_loss += yb
                .iter()
                .enumerate()
                .map(|(i, &c)| -out[[i, c]].max(PROB_FLOOR).ln())
                .sum::<f64>();
            let deltas = model.backward(&acts, &yb);
            let step = hyper.learning_rate / batch.len() as f64;
            match dp.as_mut() {
                None => {
                    let grad = model.summed_gradient(&acts, &deltas, None);
                    model.apply_step(&grad, step);
                }
                Some(DpSgd { cfg, noise }) => {
                    let clip = cfg.clip_norm();
                    let factors: Vec<f64> = model
                        .per_example_l1(&acts, &deltas)
                        .into_iter()
                        .map(|norm| if norm > clip { clip / norm } else { 1.0 })
                        .collect();
                    let grad = model.summed_gradient(&acts, &deltas, Some(&factors));
                    let mut params = model.params_flat();
                    dp_sgd_update(&mut params, &grad, hyper.learning_rate, batch.len(), cfg, noise)?;
                    model.set_params_flat(&params)?;
                }
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }
    let out = model.proba(x);
    let loss = y
        .iter()
        .enumerate()
        .map(|(i, &c)| -out[[i, c]].max(PROB_FLOOR).ln())
        .sum::<f64>()
        / y.len() as f64;
    if !loss.is_finite() || model.params_flat().iter().any(|p| !p.is_finite()) {
        return Err(Error::Divergence { epoch: hyper.epochs });
    }
    model.training_loss = loss;
    model.privacy = privacy;
    Ok(model)
}

/// Plain minibatch SGD on softmax cross-entropy.
///
/// Initialization and shuffling draw from streams derived from `rng`, so the
/// DP variant with the same `rng` visits the same batches from the same start.
pub fn fit_mlp(train_set: &LabeledDataset, hyper: &MlpHyper, rng: &SeededRng) -> Result<MlpModel> {
    train(train_set, hyper, rng, None, PrivacyBudget::non_private())
}

/// DP-SGD: each per-example gradient is clipped to L1 norm `clip_norm`, and
/// every batch step spends `epsilon / T` of the budget, `T` being the total
/// number of batches in the run. A non-private budget reduces to [`fit_mlp`].
pub fn fit_mlp_dp(
    train_set: &LabeledDataset,
    hyper: &MlpHyper,
    budget: PrivacyBudget,
    clip_norm: f64,
    rng: &SeededRng,
) -> Result<MlpModel> {
    let Some(epsilon) = budget.epsilon() else {
        return fit_mlp(train_set, hyper, rng);
    };
    if budget.stage() != Stage::S2 {
        return Err(Error::InvalidArgument(format!(
            "DP-SGD spends its budget at S2, not {}",
            budget.stage()
        )));
    }
    hyper.validate()?;
    let batches_per_epoch = train_set.n_rows().div_ceil(hyper.batch_size);
    let total = hyper.epochs * batches_per_epoch;
    let dp = if total == 0 {
        None
    } else {
        Some(DpSgd {
            cfg: SgdNoiseConfig::new(clip_norm, epsilon, total, hyper.batch_size)?,
            noise: rng.derive("noise"),
        })
    };
    train(train_set, hyper, rng, dp, budget)
}
