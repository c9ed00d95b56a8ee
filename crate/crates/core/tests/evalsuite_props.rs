mod common;

use common::rng;
use hetspec::augment::{learn_all, AugmentConfig};
use hetspec::encoder::TrainConfig;
use hetspec::evalsuite::*;
use hetspec::hetgraph::build_all_views;
use hetspec::synthgen::{generate, SynthConfig};
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Per-class F1 from an explicit confusion matrix, global F1 from pooled counts.
fn brute_force_f1(pred: &[usize], truth: &[usize], k: usize) -> (f64, f64) {
    let mut conf = vec![vec![0usize; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        conf[t][p] += 1;
    }
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    let mut f1s = Vec::new();
    for c in 0..k {
        let tp = conf[c][c];
        let fp: usize = (0..k).filter(|&t| t != c).map(|t| conf[t][c]).sum();
        let fn_: usize = (0..k).filter(|&p| p != c).map(|p| conf[c][p]).sum();
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        if tp + fn_ == 0 {
            continue;
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = tp as f64 / (tp + fn_) as f64;
        f1s.push(if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) });
    }
    let p = tp_all as f64 / (tp_all + fp_all) as f64;
    let r = tp_all as f64 / (tp_all + fn_all) as f64;
    let micro = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (f1s.iter().sum::<f64>() / f1s.len() as f64, micro)
}

/// AUC as the fraction of (positive, negative) pairs ranked correctly, ties half.
fn pairwise_auc(scores: &[f64], pos: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if pos[i] && !pos[j] {
                pairs += 1.0;
                wins += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn metrics_match_brute_force_and_ignore_order(
        k in 2usize..5,
        rows in prop::collection::vec((0usize..5, 0usize..5, prop::collection::vec(0u8..4, 5)), 2..40),
        seed in any::<u64>(),
    ) {
        let truth: Vec<usize> = rows.iter().map(|r| r.0 % k).collect();
        let pred: Vec<usize> = rows.iter().map(|r| r.1 % k).collect();
        // coarse scores so ties occur
        let probs = Array2::from_shape_fn((rows.len(), k), |(i, c)| rows[i].2[c] as f64 / 4.0);
        let m = compute_metrics(&probs, &pred, &truth).unwrap();
        let (maf1, mif1) = brute_force_f1(&pred, &truth, k);
        let acc = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
        prop_assert!((m.macro_f1 - maf1).abs() < 1e-12);
        prop_assert!((m.micro_f1 - mif1).abs() < 1e-12);
        prop_assert!((m.micro_f1 - acc).abs() < 1e-12);

        let mut aucs = Vec::new();
        for c in 0..k {
            let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            if pos.iter().any(|&p| p) && pos.iter().any(|&p| !p) {
                aucs.push(pairwise_auc(&probs.column(c).to_vec(), &pos));
            }
        }
        if !aucs.is_empty() {
            prop_assert!((m.auc - aucs.iter().sum::<f64>() / aucs.len() as f64).abs() < 1e-12);
        }
        for v in [m.macro_f1, m.micro_f1, m.auc] {
            prop_assert!((0.0..=1.0).contains(&v));
        }

        let mut order: Vec<usize> = (0..truth.len()).collect();
        order.shuffle(&mut rng(seed));
        let shuffled = compute_metrics(
            &probs.select(Axis(0), &order),
            &order.iter().map(|&i| pred[i]).collect::<Vec<_>>(),
            &order.iter().map(|&i| truth[i]).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert!((shuffled.macro_f1 - m.macro_f1).abs() < 1e-12);
        prop_assert!((shuffled.micro_f1 - m.micro_f1).abs() < 1e-12);
        prop_assert!((shuffled.auc - m.auc).abs() < 1e-12);
    }
}

#[test]
fn random_labels_give_chance_accuracy() {
    let mut accs = Vec::new();
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let x = Array2::from_shape_fn((400, 8), |_| r.random::<f64>() * 2.0 - 1.0);
        let mut y: Vec<usize> = (0..400).map(|i| i % 2).collect();
        y.shuffle(&mut r);
        let probe = LinearProbe::fit(&x.slice(ndarray::s![..200, ..]).to_owned(), &y[..200], 2).unwrap();
        let pred = argmax_rows(&probe.predict_proba(&x.slice(ndarray::s![200.., ..]).to_owned()));
        let acc = pred.iter().zip(&y[200..]).filter(|(p, t)| p == t).count() as f64 / 200.0;
        accs.push(acc);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.1, "mean accuracy {mean} ({accs:?})");
}

#[test]
fn duplicated_rows_give_identical_predictions() {
    let mut r = rng(7);
    let x = Array2::from_shape_fn((30, 4), |_| r.random::<f64>() * 2.0 - 1.0);
    let y: Vec<usize> = (0..30).map(|i| (i * 7 + i / 3) % 3).collect();
    let probe = LinearProbe::fit(&x, &y, 3).unwrap();
    let idx: Vec<usize> = (0..30).flat_map(|i| [i, i]).collect();
    let y2: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
    let probe2 = LinearProbe::fit(&x.select(Axis(0), &idx), &y2, 3).unwrap();
    let test = Array2::from_shape_fn((50, 4), |_| r.random::<f64>() * 2.0 - 1.0);
    assert_eq!(argmax_rows(&probe.predict_proba(&test)), argmax_rows(&probe2.predict_proba(&test)));
    assert!((&probe.weights - &probe2.weights).iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn probe_converges_or_hits_iteration_cap() {
    let mut r = rng(9);
    let x = Array2::from_shape_fn((60, 5), |_| r.random::<f64>());
    let y: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let p = LinearProbe::fit(&x, &y, 3).unwrap();
    assert!(p.grad_norm <= PROBE_TOL || p.iterations == PROBE_MAX_ITERS);
    assert!(p.weights.iter().all(|v| v.is_finite()));
}

#[test]
fn noiseless_separated_features_are_probed_exactly() {
    let g = generate(&SynthConfig {
        feature_noise: 0.0,
        p_out: 0.0,
        ..Default::default()
    })
    .unwrap();
    let cfg = EvalConfig {
        runs: 3,
        ..Default::default()
    };
    for r in raw_feature_baseline(&g, &cfg).unwrap() {
        assert_eq!(r.micro_f1.mean, 1.0);
        assert!(r.scaled);
    }
}

#[test]
fn arms_share_splits_and_are_reproducible() {
    let g = generate(&SynthConfig {
        n_target: 45,
        aux_size: 20,
        p_in: 0.3,
        feature_dim: 6,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let mut train = TrainConfig {
        dim: 8,
        epochs: 4,
        ..Default::default()
    };
    train.aug.iterations = 3;
    let cfg = EvalConfig {
        train,
        runs: 2,
        split_sizes: vec![3, 5],
        ..Default::default()
    };
    let out = run_ablation(&g, &cfg).unwrap();
    assert_eq!(out.reports.len(), 6);
    assert_eq!(out.traces.len(), 6);
    for size in [3, 5] {
        let hashes: Vec<&Vec<u64>> = out.reports.iter().filter(|r| r.split_size == size).map(|r| &r.split_hashes).collect();
        assert_eq!(hashes.len(), 3);
        assert!(hashes.windows(2).all(|w| w[0] == w[1]));
    }
    for r in &out.reports {
        for s in [&r.macro_f1, &r.micro_f1, &r.auc] {
            assert!(s.std >= 0.0 && (0.0..=1.0).contains(&s.mean) && s.runs.len() == 2);
        }
    }
    assert_eq!(run_ablation(&g, &cfg).unwrap(), out);

    let views = build_all_views(&g).unwrap();
    let learned = learn_all(&views, &AugmentConfig { iterations: 3, ..Default::default() }).unwrap();
    let (a, b) = arm_views(Arm::ShclS, &views, &learned, &cfg.train).unwrap();
    assert_eq!(a, views);
    assert_eq!(b, views);
    let first = arm_views(Arm::ShclL, &views, &learned, &cfg.train).unwrap();
    assert_eq!(arm_views(Arm::ShclL, &views, &learned, &cfg.train).unwrap(), first);
    assert_ne!(first.0, views);
}

#[test]
fn undersized_classes_are_rejected() {
    let labels: Vec<Option<usize>> = (0..30).map(|i| Some(usize::from(i >= 25))).collect();
    assert!(matches!(
        make_split(&labels, &SplitSpec::new(10, 0)),
        Err(EvalError::ClassTooSmall { class: 1, available: 5, .. })
    ));
    let one: Vec<Option<usize>> = vec![Some(0); 10];
    assert!(matches!(make_split(&one, &SplitSpec::new(2, 0)), Err(EvalError::TooFewClasses(1))));
}
