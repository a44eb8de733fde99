mod common;

use common::*;
use quesim::secondary::{
    accuracy, ada_fit, ada_fit_traced, fit_tree, log_loss, rf_fit, svm_fit, AdaParams, ForestParams, Stump, SvmParams,
    TreeParams,
};

/// Independent discrete AdaBoost trace on one feature: every threshold and
/// orientation is scored from scratch each round.
fn hand_trace(x: &[f64], y: &[u8], rounds: usize) -> Vec<(f64, f64, f64, Vec<f64>)> {
    let n = x.len();
    let s: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut thresholds = vec![sorted[0] - 1.0];
    thresholds.extend(sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));

    let mut w = vec![1.0 / n as f64; n];
    let mut out = Vec::new();
    for _ in 0..rounds {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for &t in &thresholds {
            for left in [-1.0, 1.0] {
                let err: f64 = (0..n)
                    .filter(|&i| (if x[i] <= t { left } else { -left }) != s[i])
                    .map(|i| w[i])
                    .sum();
                if err < best.0 - 1e-12 {
                    best = (err, t, left);
                }
            }
        }
        let (err, t, left) = best;
        let alpha = 0.5 * ((1.0 - err) / err).ln();
        for i in 0..n {
            let h = if x[i] <= t { left } else { -left };
            w[i] *= (-alpha * s[i] * h).exp();
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
        out.push((t, err, alpha, w.clone()));
    }
    out
}

#[test]
fn adaboost_matches_the_hand_trace_on_eight_points() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let y = [1, 1, 1, 0, 0, 1, 0, 0];
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    let (_, trace) = ada_fit_traced(&rows, &y, &AdaParams { n_rounds: 3 }).unwrap();
    let oracle = hand_trace(&x, &y, 3);
    assert_eq!(trace.len(), 3);
    // Round one by hand: "x <= 3.5 votes +1" misses only x = 6, so ε = 1/8,
    // α = ½ ln 7, and x = 6 ends up with half of the total weight.
    assert_eq!(trace[0].stump.threshold, 3.5);
    assert_eq!((trace[0].stump.left, trace[0].stump.right), (1.0, -1.0));
    assert!((trace[0].error - 0.125).abs() < 1e-15);
    assert!((trace[0].alpha - 0.5 * 7f64.ln()).abs() < 1e-15);
    assert!((trace[0].weights[5] - 0.5).abs() < 1e-15);
    assert!((trace[0].weights[0] - 1.0 / 14.0).abs() < 1e-15);
    for (round, (t, err, alpha, w)) in trace.iter().zip(&oracle) {
        assert_eq!(round.stump.threshold, *t);
        assert!((round.error - err).abs() < 1e-12);
        assert!((round.alpha - alpha).abs() < 1e-12);
        for (a, b) in round.weights.iter().zip(w) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn constant_score_gives_one_half() {
    let model = quesim::secondary::AdaBoostModel {
        stumps: vec![
            Stump {
                feature: 0,
                threshold: 0.0,
                left: -1.0,
                right: 1.0,
            };
            2
        ],
        alphas: vec![0.7, -0.7],
    };
    assert_eq!(model.predict_proba(&[3.0]), 0.5);
}

#[test]
fn forest_and_svm_separate_linear_data_and_adaboost_axis_data() {
    let data = linearly_separable(500, 1);
    let forest = rf_fit(&data.x_train, &data.y_train, &ForestParams::default()).unwrap();
    let acc = accuracy(&probs_of(|r| forest.predict_proba(r), &data.x_test), &data.y_test).unwrap();
    assert!(acc >= 0.95, "forest accuracy {acc}");

    let svm = svm_fit(&data.x_train, &data.y_train, &SvmParams::default()).unwrap();
    let acc = accuracy(&probs_of(|r| svm.predict_proba(r), &data.x_test), &data.y_test).unwrap();
    assert!(acc >= 0.95, "svm accuracy {acc}");

    let data = axis_separable(500, 2);
    let ada = ada_fit(&data.x_train, &data.y_train, &AdaParams::default()).unwrap();
    let acc = accuracy(&probs_of(|r| ada.predict_proba(r), &data.x_test), &data.y_test).unwrap();
    assert!(acc >= 0.90, "adaboost accuracy {acc}");
}

#[test]
fn perfect_predictions_have_negligible_log_loss() {
    let labels = [0, 1, 1, 0, 1];
    let probs: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    assert!(log_loss(&probs, &labels).unwrap() < 1e-13);
}

#[test]
fn shallow_trees_narrow_the_generalisation_gap() {
    let data = noisy(400, 3, 0.2);
    let gap = |depth| {
        let mut r = rng(0);
        let params = TreeParams {
            max_depth: Some(depth),
            features_per_split: 4,
        };
        let tree = fit_tree(&data.x_train, &data.y_train, &params, &mut r).unwrap();
        let train = accuracy(&probs_of(|x| tree.predict(x), &data.x_train), &data.y_train).unwrap();
        let test = accuracy(&probs_of(|x| tree.predict(x), &data.x_test), &data.y_test).unwrap();
        train - test
    };
    assert!(gap(3) < gap(20), "gap(3) = {}, gap(20) = {}", gap(3), gap(20));
}

#[test]
fn many_trees_beat_one_on_held_out_log_loss() {
    let mut wins = 0;
    for seed in 0..5 {
        let data = noisy(300, 100 + seed, 0.1);
        let loss = |n_trees| {
            let params = ForestParams {
                n_trees,
                seed,
                ..Default::default()
            };
            let f = rf_fit(&data.x_train, &data.y_train, &params).unwrap();
            log_loss(&probs_of(|r| f.predict_proba(r), &data.x_test), &data.y_test).unwrap()
        };
        if loss(100) <= loss(1) {
            wins += 1;
        }
    }
    assert!(wins >= 3, "100 trees won {wins} of 5");
}

#[test]
fn doubling_lambda_never_grows_the_svm_weights() {
    let data = noisy(300, 9, 0.15);
    let norm = |lambda| {
        let params = SvmParams {
            lambda,
            epochs: 200,
            seed: 4,
            ..Default::default()
        };
        svm_fit(&data.x_train, &data.y_train, &params).unwrap().weight_norm()
    };
    let mut lambda = 1e-3;
    let mut prev = norm(lambda);
    for _ in 0..5 {
        lambda *= 2.0;
        let next = norm(lambda);
        assert!(next <= prev + 1e-9, "λ = {lambda}: {next} > {prev}");
        prev = next;
    }
}

#[test]
fn fits_are_deterministic_and_outputs_are_probabilities() {
    let data = noisy(200, 5, 0.1);
    let params = quesim::secondary::ClassifierParams::default();
    for kind in [
        quesim::secondary::ClassifierKind::Rf,
        quesim::secondary::ClassifierKind::Ada,
        quesim::secondary::ClassifierKind::Svm,
    ] {
        let a = quesim::secondary::SecondaryModel::fit(kind, &data.x_train, &data.y_train, &params).unwrap();
        let b = quesim::secondary::SecondaryModel::fit(kind, &data.x_train, &data.y_train, &params).unwrap();
        assert_eq!(a, b, "{kind}");
        for row in &data.x_test {
            let p = a.predict_proba(row);
            assert!((0.0..=1.0).contains(&p), "{kind}: {p}");
        }
    }
}
