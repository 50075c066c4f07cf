use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, ModelKind};
use crate::attacks::{ai_advantage, calibrate_salem_threshold, ensure_disjoint, salem_mi, yeom_mi};
use crate::budget::{PrivacyBudget, Stage};
use crate::data::partition_indices;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::mechanisms::perturb_dataset_s1;
use crate::metrics::{accuracy, accuracy_loss};
use crate::models::{fit_gnb, fit_gnb_dp, fit_mlp, fit_mlp_dp, predict, AnyModel, PredictiveModel};
use crate::rng::{derive_seed, SeededRng};

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub dataset: String,
    pub n_classes: usize,
    pub method: Method,
    pub stage: Stage,
    /// `None` for the non-private baseline.
    pub epsilon: Option<f64>,
    pub rep: usize,
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    pub acl: f64,
    pub salem_mi_adv: f64,
    pub yeom_mi_adv: f64,
    pub yeom_ai_mean_adv: f64,
    pub yeom_ai_std: f64,
    pub salem_ai_mean_adv: f64,
    pub wall_time_s: f64,
    pub seed: u64,
}

/// Everything measured on one trained model.
#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub accuracy: f64,
    pub salem_mi_adv: f64,
    pub yeom_mi_adv: f64,
    pub yeom_ai_mean_adv: f64,
    pub yeom_ai_std: f64,
    pub salem_ai_mean_adv: f64,
    pub wall_time_s: f64,
}

/// Splits and streams shared by every trial of one repetition. Baselines
/// and private trials see the same rows and the same MLP initialization.
pub(crate) struct RepContext {
    pub rep_seed: u64,
    root: SeededRng,
    train: LabeledDataset,
    test: LabeledDataset,
    ref_members: LabeledDataset,
    ref_nonmembers: LabeledDataset,
}

pub(crate) fn rep_seed(master: u64, dataset: &str, rep: usize) -> u64 {
    derive_seed(master, &[dataset, "rep", &rep.to_string()])
}

pub(crate) fn prepare_rep(cfg: &ExperimentConfig, dataset: &str, ds: &LabeledDataset, rep: usize) -> Result<RepContext> {
    let seed = rep_seed(cfg.master_seed, dataset, rep);
    let root = SeededRng::new(seed, 0);
    let r = cfg.reference_size;
    let parts = partition_indices(
        ds.n_rows(),
        &[cfg.n_train, cfg.n_test, r, r],
        &mut root.derive("split"),
    )?;
    let eval: Vec<usize> = parts[0].iter().chain(&parts[1]).copied().collect();
    let reference: Vec<usize> = parts[2].iter().chain(&parts[3]).copied().collect();
    ensure_disjoint(&eval, &reference)?;
    Ok(RepContext {
        rep_seed: seed,
        train: ds.select(&parts[0]),
        test: ds.select(&parts[1]),
        ref_members: ds.select(&parts[2]),
        ref_nonmembers: ds.select(&parts[3]),
        root,
    })
}

/// Fit `method`'s model family under `budget`. Non-private budgets give the
/// plain model. `model_rng` drives MLP initialization and batch order;
/// `noise` feeds input and statistic perturbation.
pub fn train_model(
    cfg: &ExperimentConfig,
    method: Method,
    budget: PrivacyBudget,
    train: &LabeledDataset,
    model_rng: &SeededRng,
    noise: &mut SeededRng,
) -> Result<AnyModel> {
    if budget.is_private() && budget.stage() != method.stage() {
        return Err(Error::InvalidArgument(format!(
            "{method} spends its budget at {}, got {}",
            method.stage(),
            budget.stage()
        )));
    }
    let model = match (method.model_kind(), budget.stage()) {
        (ModelKind::Gnb, Stage::S1) => AnyModel::Gnb(fit_gnb(&s1_input(train, budget, noise)?)?),
        (ModelKind::Mlp, Stage::S1) => AnyModel::Mlp(fit_mlp(&s1_input(train, budget, noise)?, &cfg.mlp, model_rng)?),
        (ModelKind::Gnb, Stage::S3) => AnyModel::Gnb(fit_gnb_dp(train, budget, noise)?),
        (ModelKind::Mlp, Stage::S2) => AnyModel::Mlp(fit_mlp_dp(train, &cfg.mlp, budget, cfg.clip_norm, model_rng)?),
        (ModelKind::Gnb, _) => AnyModel::Gnb(fit_gnb(train)?),
        (ModelKind::Mlp, _) => AnyModel::Mlp(fit_mlp(train, &cfg.mlp, model_rng)?),
    };
    Ok(match (model, budget) {
        (AnyModel::Gnb(m), b) if b.stage() == Stage::S1 => AnyModel::Gnb(m.with_privacy(b)),
        (AnyModel::Mlp(m), b) if b.stage() == Stage::S1 => AnyModel::Mlp(m.with_privacy(b)),
        (m, _) => m,
    })
}

fn s1_input(train: &LabeledDataset, budget: PrivacyBudget, noise: &mut SeededRng) -> Result<LabeledDataset> {
    let eps = budget.epsilon().expect("S1 budget is private");
    perturb_dataset_s1(train, eps, noise)
}

/// Train the target and a shadow copy, then measure utility and all four
/// attacks. `epsilon = None` is the non-private baseline for the method's
/// model family.
pub(crate) fn evaluate(
    cfg: &ExperimentConfig,
    ctx: &RepContext,
    method: Method,
    epsilon: Option<f64>,
) -> Result<Outcome> {
    let start = Instant::now();
    let (budget, trial) = match epsilon {
        Some(eps) => (
            PrivacyBudget::new(eps, method.stage())?,
            ctx.root.derive(method.as_str()).derive_indexed("epsilon", eps.to_bits()),
        ),
        None => (PrivacyBudget::non_private(), ctx.root.derive("baseline")),
    };

    let model = train_model(cfg, method, budget, &ctx.train, &ctx.root.derive("model"), &mut trial.derive("noise"))?;
    let shadow = train_model(
        cfg,
        method,
        budget,
        &ctx.ref_members,
        &ctx.root.derive("shadow-model"),
        &mut trial.derive("shadow-noise"),
    )?;
    let threshold = calibrate_salem_threshold(&shadow, ctx.ref_members.features(), ctx.ref_nonmembers.features())?;

    let acc = accuracy(&predict(&model, ctx.test.features())?, ctx.test.labels())?;
    let salem = salem_mi(&model, &ctx.train, &ctx.test, &threshold)?;
    let yeom = yeom_mi(&model, &ctx.train, &ctx.test)?;
    let n_attr = cfg.n_protected_attributes.min(model.n_features());
    let ai = ai_advantage(&model, &ctx.train, &ctx.test, n_attr, &mut ctx.root.derive("attributes"))?;

    Ok(Outcome {
        accuracy: acc,
        salem_mi_adv: salem.advantage,
        yeom_mi_adv: yeom.advantage,
        yeom_ai_mean_adv: ai.yeom.mean,
        yeom_ai_std: ai.yeom.std,
        salem_ai_mean_adv: ai.salem.mean,
        wall_time_s: if cfg.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
    })
}

pub(crate) fn record(
    dataset: &str,
    n_classes: usize,
    method: Method,
    epsilon: Option<f64>,
    rep: usize,
    seed: u64,
    outcome: &Outcome,
    baseline_accuracy: f64,
) -> Result<TrialRecord> {
    let acl = match epsilon {
        Some(_) => accuracy_loss(outcome.accuracy, baseline_accuracy)?,
        None => 0.0,
    };
    Ok(TrialRecord {
        dataset: dataset.to_string(),
        n_classes,
        method,
        stage: if epsilon.is_some() { method.stage() } else { Stage::None },
        epsilon,
        rep,
        accuracy: outcome.accuracy,
        baseline_accuracy,
        acl,
        salem_mi_adv: outcome.salem_mi_adv,
        yeom_mi_adv: outcome.yeom_mi_adv,
        yeom_ai_mean_adv: outcome.yeom_ai_mean_adv,
        yeom_ai_std: outcome.yeom_ai_std,
        salem_ai_mean_adv: outcome.salem_ai_mean_adv,
        wall_time_s: outcome.wall_time_s,
        seed,
    })
}

/// Run one trial end to end, including the matching baseline it is scored
/// against. `epsilon = None` yields the baseline record itself.
pub fn run_trial(
    cfg: &ExperimentConfig,
    dataset: &str,
    ds: &LabeledDataset,
    method: Method,
    epsilon: Option<f64>,
    rep: usize,
) -> Result<TrialRecord> {
    let ctx = prepare_rep(cfg, dataset, ds, rep)?;
    let wrap = |e: Error| Error::Trial {
        method: method.to_string(),
        epsilon: epsilon.map_or("inf".into(), |e| e.to_string()),
        rep,
        source: Box::new(e),
    };
    let base = evaluate(cfg, &ctx, method, None).map_err(wrap)?;
    let outcome = match epsilon {
        Some(_) => evaluate(cfg, &ctx, method, epsilon).map_err(wrap)?,
        None => base.clone(),
    };
    record(dataset, ds.n_classes(), method, epsilon, rep, ctx.rep_seed, &outcome, base.accuracy)
}
