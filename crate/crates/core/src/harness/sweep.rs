use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use super::config::{DatasetSpec, ExperimentConfig, Method, ModelKind};
use super::trial::{evaluate, prepare_rep, record, Outcome, TrialRecord};
use crate::data::{load_csv, relabel_transactions, synthetic_family};
use crate::dataset::{minmax_normalize, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// A sweep that stopped on a failed trial. `partial` holds every record that
/// completed, sorted, so it can be flushed before exiting.
#[derive(Debug)]
pub struct SweepError {
    pub partial: Vec<TrialRecord>,
    pub error: Error,
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} trials completed)", self.error, self.partial.len())
    }
}

impl std::error::Error for SweepError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for SweepError {
    fn from(error: Error) -> Self {
        SweepError {
            partial: Vec::new(),
            error,
        }
    }
}

/// Materialize the configured datasets as `(name, dataset)` pairs. A
/// relabeled family gets one entry per `k`, named `<name>_k<k>`.
pub fn load_family(cfg: &ExperimentConfig) -> Result<Vec<(String, LabeledDataset)>> {
    let named = |name: &str, ks: &[usize], sets: Vec<LabeledDataset>| {
        ks.iter().map(|k| format!("{name}_k{k}")).zip(sets).collect()
    };
    match &cfg.dataset {
        DatasetSpec::Synthetic { name, n, p, k_values } => {
            let seed = derive_seed(cfg.master_seed, &["data", name]);
            Ok(named(name, k_values, synthetic_family(*n, *p, k_values, seed)?))
        }
        DatasetSpec::Csv {
            name,
            path,
            has_header,
            label_column,
            k_values,
        } => {
            let raw = load_csv(path, *has_header, *label_column)?;
            let norm = minmax_normalize(&raw.features)?;
            if !k_values.is_empty() {
                let seed = derive_seed(cfg.master_seed, &["data", name]);
                return Ok(named(name, k_values, relabel_transactions(&norm, k_values, seed)?));
            }
            let labels = raw
                .labels
                .ok_or_else(|| Error::Config("CSV dataset has no label column and no k_values".into()))?;
            let n_classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
            let ranges = norm.declared_ranges();
            Ok(vec![(name.clone(), LabeledDataset::new(norm.features, labels, n_classes, ranges)?)])
        }
    }
}

fn eps_order(e: Option<f64>) -> f64 {
    e.unwrap_or(f64::INFINITY)
}

pub(crate) fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then(a.method.cmp(&b.method))
            .then(eps_order(a.epsilon).total_cmp(&eps_order(b.epsilon)))
            .then(a.rep.cmp(&b.rep))
    });
}

/// Run every (dataset, method, epsilon, repetition) cell plus one
/// non-private baseline per (dataset, method, repetition).
///
/// Work runs on a pool of `jobs` threads; output order and content do not
/// depend on `jobs`. On failure the completed records come back in the error.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> std::result::Result<Vec<TrialRecord>, SweepError> {
    cfg.validate()?;
    let family = load_family(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| sweep_in_pool(cfg, &family))
}

#[derive(Clone, Copy)]
enum Task {
    Baseline { d: usize, kind: ModelKind, method: Method, rep: usize },
    Private { d: usize, method: Method, eps: f64, rep: usize },
}

fn sweep_in_pool(
    cfg: &ExperimentConfig,
    family: &[(String, LabeledDataset)],
) -> std::result::Result<Vec<TrialRecord>, SweepError> {
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();

    let mut tasks = Vec::new();
    for d in 0..family.len() {
        for rep in 0..cfg.n_repetitions {
            let mut kinds_done = Vec::new();
            for &method in &methods {
                if !kinds_done.contains(&method.model_kind()) {
                    kinds_done.push(method.model_kind());
                    tasks.push(Task::Baseline { d, kind: method.model_kind(), method, rep });
                }
            }
            for &method in &methods {
                for &eps in &cfg.epsilon_grid {
                    tasks.push(Task::Private { d, method, eps, rep });
                }
            }
        }
    }

    let run = |task: &Task| -> Result<Outcome> {
        let (d, method, eps, rep) = match *task {
            Task::Baseline { d, method, rep, .. } => (d, method, None, rep),
            Task::Private { d, method, eps, rep } => (d, method, Some(eps), rep),
        };
        let (name, ds) = &family[d];
        let ctx = prepare_rep(cfg, name, ds, rep)?;
        log::debug!("{name} {method} eps={eps:?} rep={rep}");
        evaluate(cfg, &ctx, method, eps).map_err(|e| Error::Trial {
            method: method.to_string(),
            epsilon: eps.map_or("inf".into(), |e| e.to_string()),
            rep,
            source: Box::new(e),
        })
    };
    let outcomes: Vec<Result<Outcome>> = tasks.par_iter().map(run).collect();

    let mut first_error = None;
    let mut baselines: HashMap<(usize, ModelKind, usize), Outcome> = HashMap::new();
    let mut private = Vec::new();
    for (task, outcome) in tasks.iter().zip(outcomes) {
        match (task, outcome) {
            (_, Err(e)) => {
                first_error.get_or_insert(e);
            }
            (Task::Baseline { d, kind, rep, .. }, Ok(o)) => {
                baselines.insert((*d, *kind, *rep), o);
            }
            (Task::Private { .. }, Ok(o)) => private.push((*task, o)),
        }
    }

    let mut records = Vec::new();
    let mut push = |name: &str, n_classes, method: Method, eps, rep, o: &Outcome, base: f64| -> Result<()> {
        let seed = super::trial::rep_seed(cfg.master_seed, name, rep);
        records.push(record(name, n_classes, method, eps, rep, seed, o, base)?);
        Ok(())
    };
    for d in 0..family.len() {
        for rep in 0..cfg.n_repetitions {
            for &method in &methods {
                if let Some(o) = baselines.get(&(d, method.model_kind(), rep)) {
                    let (name, ds) = &family[d];
                    push(name, ds.n_classes(), method, None, rep, o, o.accuracy)?;
                }
            }
        }
    }
    for (task, o) in &private {
        let Task::Private { d, method, eps, rep } = *task else { unreachable!() };
        if let Some(base) = baselines.get(&(d, method.model_kind(), rep)) {
            let (name, ds) = &family[d];
            if let Err(e) = push(name, ds.n_classes(), method, Some(eps), rep, o, base.accuracy) {
                first_error.get_or_insert(e);
            }
        }
    }
    sort_records(&mut records);
    match first_error {
        None => Ok(records),
        Some(error) => Err(SweepError { partial: records, error }),
    }
}
