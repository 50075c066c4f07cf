use std::collections::HashSet;

use dp_tradeoff::harness::{
    load_config, read_results, run_sweep, run_trial, write_results, DatasetSpec, ExperimentConfig, Method, Profile,
    TrialRecord,
};
use dp_tradeoff::metrics::accuracy_loss;
use dp_tradeoff::models::MlpHyper;
use dp_tradeoff::{Error, Stage};

fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_profile(Profile::Desk);
    cfg.dataset = DatasetSpec::Synthetic {
        name: "tiny".into(),
        n: 600,
        p: 6,
        k_values: vec![3],
    };
    cfg.epsilon_grid = vec![0.1, 10.0, 1000.0];
    cfg.n_train = 150;
    cfg.n_test = 150;
    cfg.reference_size = 100;
    cfg.n_repetitions = 2;
    cfg.n_protected_attributes = 4;
    cfg.record_wall_time = false;
    cfg.master_seed = 7;
    cfg.mlp = MlpHyper {
        hidden: vec![8],
        epochs: 3,
        batch_size: 50,
        ..MlpHyper::default()
    };
    cfg
}

fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Vec<TrialRecord> {
    run_sweep(cfg, jobs).unwrap()
}

#[test]
fn grid_counts_and_baseline_pairing() {
    let cfg = tiny();
    let recs = sweep(&cfg, 1);
    let baselines: Vec<_> = recs.iter().filter(|r| r.epsilon.is_none()).collect();
    assert_eq!(recs.len() - baselines.len(), 4 * 3 * 2);
    assert_eq!(baselines.len(), 4 * 2);
    for m in Method::ALL {
        for rep in 0..2 {
            assert!(baselines.iter().any(|b| b.method == m && b.rep == rep));
        }
        for &e in &cfg.epsilon_grid {
            assert_eq!(recs.iter().filter(|r| r.method == m && r.epsilon == Some(e)).count(), 2);
        }
    }
    for r in &recs {
        let base = baselines.iter().find(|b| b.method == r.method && b.rep == r.rep).unwrap();
        assert_eq!(r.baseline_accuracy, base.accuracy);
        assert_eq!(r.seed, base.seed);
        assert_eq!(r.dataset, "tiny_k3");
        assert_eq!(r.n_classes, 3);
        for adv in [r.salem_mi_adv, r.yeom_mi_adv, r.yeom_ai_mean_adv, r.salem_ai_mean_adv] {
            assert!((-1.0..=1.0).contains(&adv));
        }
        match r.epsilon {
            None => {
                assert_eq!(r.acl, 0.0);
                assert_eq!(r.stage, Stage::None);
            }
            Some(_) => {
                assert_eq!(r.stage, r.method.stage());
                let want = accuracy_loss(r.accuracy, r.baseline_accuracy).unwrap();
                assert!((r.acl - want).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn sorted_and_independent_of_workers() {
    let cfg = tiny();
    let one = sweep(&cfg, 1);
    let three = sweep(&cfg, 3);
    assert_eq!(one, three);
    let key = |r: &TrialRecord| (r.method, r.epsilon.unwrap_or(f64::INFINITY), r.rep);
    for w in one.windows(2) {
        let (a, b) = (key(&w[0]), key(&w[1]));
        assert!(a.0 < b.0 || (a.0 == b.0 && (a.1 < b.1 || (a.1 == b.1 && a.2 < b.2))));
    }
    let dir = tempfile::tempdir().unwrap();
    let (p1, p3) = (dir.path().join("1.csv"), dir.path().join("3.csv"));
    write_results(&one, &p1).unwrap();
    write_results(&three, &p3).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p3).unwrap());
    assert_eq!(read_results(&p1).unwrap(), one);
}

#[test]
fn single_trial_matches_sweep_record() {
    let cfg = tiny();
    let recs = sweep(&cfg, 1);
    let family = dp_tradeoff::harness::load_family(&cfg).unwrap();
    let (name, ds) = &family[0];
    for (method, eps, rep) in [(Method::S3Gnb, Some(10.0), 1), (Method::S2Mlp, Some(0.1), 0), (Method::S1Mlp, None, 1)] {
        let t = run_trial(&cfg, name, ds, method, eps, rep).unwrap();
        let again = run_trial(&cfg, name, ds, method, eps, rep).unwrap();
        assert_eq!(t, again);
        let s = recs.iter().find(|r| r.method == method && r.epsilon == eps && r.rep == rep).unwrap();
        assert_eq!(&t, s);
    }
}

#[test]
fn two_class_s3_near_baseline_at_high_epsilon() {
    let mut cfg = ExperimentConfig::for_profile(Profile::Desk);
    cfg.dataset = DatasetSpec::Synthetic {
        name: "two".into(),
        n: 4_000,
        p: 50,
        k_values: vec![2],
    };
    cfg.n_train = 1_000;
    cfg.n_test = 1_000;
    cfg.reference_size = 500;
    let family = dp_tradeoff::harness::load_family(&cfg).unwrap();
    let (name, ds) = &family[0];
    let mut acl: Vec<f64> = (0..5)
        .map(|rep| run_trial(&cfg, name, ds, Method::S3Gnb, Some(1000.0), rep).unwrap().acl)
        .collect();
    acl.sort_by(f64::total_cmp);
    assert!(acl[2].abs() < 0.05, "median ACL {}", acl[2]);
}

#[test]
fn empty_methods_rejected() {
    let mut cfg = tiny();
    cfg.methods.clear();
    assert!(matches!(run_sweep(&cfg, 1).unwrap_err().error, Error::Config(_)));
}

#[test]
fn failing_trials_keep_partial_results() {
    // 40 classes over 60 training rows: some class has fewer than two members
    let mut cfg = tiny();
    cfg.dataset = DatasetSpec::Synthetic {
        name: "sparse".into(),
        n: 300,
        p: 4,
        k_values: vec![40],
    };
    cfg.n_train = 60;
    cfg.n_test = 60;
    cfg.reference_size = 60;
    cfg.n_protected_attributes = 2;
    let err = run_sweep(&cfg, 1).unwrap_err();
    match &err.error {
        Error::Trial { method, source, .. } => {
            assert!(method.ends_with("GNB"));
            assert!(matches!(**source, Error::SparseClass { .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(!err.partial.is_empty());
    assert!(err.partial.iter().all(|r| r.method.as_str().ends_with("MLP")));
}

#[test]
fn csv_dataset_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("toy.csv");
    let mut text = String::from("a,b,c,label\n");
    for i in 0..400 {
        let c = i % 2;
        text += &format!("{},{},{},{}\n", (i * 37 % 101) as f64 + 200.0 * c as f64, i % 7, (i * 13 % 17) as f64 * 0.5, c);
    }
    std::fs::write(&data, text).unwrap();
    let cfg_path = dir.path().join("exp.toml");
    std::fs::write(
        &cfg_path,
        format!(
            "methods = [\"S1-GNB\", \"S3-GNB\"]\nepsilon_grid = [1.0, 100.0]\nn_train = 100\nn_test = 100\n\
             reference_size = 50\nn_protected_attributes = 2\nrecord_wall_time = false\n\
             [dataset]\nkind = \"csv\"\nname = \"toy\"\npath = {:?}\nhas_header = true\nlabel_column = \"last\"\n",
            data.display().to_string()
        ),
    )
    .unwrap();
    let cfg = load_config(Some(&cfg_path), Profile::Desk).unwrap();
    assert_eq!(cfg.n_repetitions, 10);
    let recs = run_sweep(&cfg, 1).unwrap();
    assert_eq!(recs.len(), 2 * 2 * 10 + 2 * 10);
    let names: HashSet<_> = recs.iter().map(|r| r.dataset.as_str()).collect();
    assert_eq!(names, HashSet::from(["toy"]));
    let base = recs.iter().find(|r| r.epsilon.is_none()).unwrap();
    assert!(base.accuracy > 0.9, "separable toy data, got {}", base.accuracy);
}

#[test]
fn missing_config_file() {
    let err = load_config(Some(std::path::Path::new("/nonexistent/exp.toml")), Profile::Desk).unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)));
}
