use ndarray::Array2;
use proptest::prelude::*;

use dp_tradeoff::data::kmeans_label;
use dp_tradeoff::mechanisms::{nb_sensitivities, per_batch_epsilon, SgdNoiseConfig};
use dp_tradeoff::models::{fit_mlp, Activation, MlpHyper};
use dp_tradeoff::{LabeledDataset, SeededRng};

fn brute_force_sse(pts: &[f64]) -> f64 {
    let n = pts.len();
    (1..(1u32 << n) - 1)
        .map(|mask| {
            [0, 1]
                .iter()
                .map(|&side| {
                    let g: Vec<f64> = (0..n).filter(|i| (mask >> i) & 1 == side).map(|i| pts[i]).collect();
                    let m = g.iter().sum::<f64>() / g.len() as f64;
                    g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kmeans_matches_brute_force_on_two_blobs(
        left in prop::collection::vec(0.0f64..0.1, 1..4),
        right in prop::collection::vec(0.9f64..1.0, 1..4),
        seed in any::<u64>(),
    ) {
        let pts: Vec<f64> = left.iter().chain(&right).copied().collect();
        let x = Array2::from_shape_vec((pts.len(), 1), pts.clone()).unwrap();
        let (labels, model) = kmeans_label(&x, 2, seed).unwrap();
        prop_assert!((model.inertia - brute_force_sse(&pts)).abs() < 1e-12);
        let l = labels[0];
        prop_assert!(labels[..left.len()].iter().all(|&v| v == l));
        prop_assert!(labels[left.len()..].iter().all(|&v| v != l));
    }

    #[test]
    fn sgd_budget_sums_to_total(eps in 1e-3f64..1e4, batches in 1usize..5000) {
        let cfg = SgdNoiseConfig::new(1.0, eps, batches, 32).unwrap();
        let spent = per_batch_epsilon(&cfg) * batches as f64;
        prop_assert!((spent - eps).abs() <= 1e-12 * eps.max(1.0));
    }

    #[test]
    fn nb_shares_sum_to_total(eps in 1e-3f64..1e4, p in 1usize..200, n in 2usize..10_000) {
        let s = nb_sensitivities(n, 1.0, eps, p).unwrap();
        prop_assert!((s.epsilon_share * 2.0 * p as f64 - eps).abs() <= 1e-12 * eps.max(1.0));
        prop_assert!((s.s_mu - 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
        prop_assert!((s.s_sigma - (n as f64).sqrt() / (n as f64 + 1.0)).abs() < 1e-15);
    }
}

fn gradient_rel_error(hidden: Vec<usize>, activation: Activation) -> f64 {
    let x = Array2::from_shape_fn((10, 3), |(i, j)| ((i * 5 + j * 7) % 13) as f64 / 13.0);
    let labels: Vec<usize> = (0..10).map(|i| (i * 3) % 4).collect();
    let ds = LabeledDataset::with_unit_ranges(x.clone(), labels.clone(), 4).unwrap();
    let hyper = MlpHyper {
        hidden,
        activation,
        learning_rate: 0.05,
        epochs: 2,
        batch_size: 5,
    };
    let mut model = fit_mlp(&ds, &hyper, &SeededRng::new(11, 0)).unwrap();
    let (_, analytic) = model.loss_and_gradient(&x, &labels);
    let theta = model.params_flat();
    let h = 1e-5;
    let numeric: Vec<f64> = (0..theta.len())
        .map(|i| {
            let mut t = theta.clone();
            t[i] += h;
            model.set_params_flat(&t).unwrap();
            let up = model.loss_and_gradient(&x, &labels).0;
            t[i] -= 2.0 * h;
            model.set_params_flat(&t).unwrap();
            let down = model.loss_and_gradient(&x, &labels).0;
            (up - down) / (2.0 * h)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&analytic).max(norm(&numeric))
}

#[test]
fn gradient_check_two_hidden_layers() {
    assert!(gradient_rel_error(vec![6, 5], Activation::Tanh) < 1e-4);
}

#[test]
fn gradient_check_relu() {
    // ReLU kinks make finite differences unreliable only at exact zeros
    assert!(gradient_rel_error(vec![7], Activation::Relu) < 1e-4);
}
