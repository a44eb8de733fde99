//! Acceptance suite. Runs each criterion with its time budget and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fail.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use quesim::augment::{augment_all, expected_positive_total};
use quesim::dataset::Provenance;
use quesim::features::{
    common_dup_count, featurize, tfidf_word_match, word_match_share, DuplicateGraph, FeatureContext, IdfTable,
    Stopwords,
};
use quesim::gru::{train, SiameseModel, TrainConfig};
use quesim::pipeline::{run_all, stages::files};
use quesim::secondary::{accuracy, ada_fit, log_loss, rf_fit, svm_fit, AdaParams, ForestParams, SvmParams};
use quesim::synth::SynthConfig;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradients() -> Outcome {
    let model = random_model(tiny_config(&[3, 2], &[5], 5), 9, 4, 11);
    let mut r = rng(1);
    let pairs: Vec<_> = (0..2)
        .map(|i| (random_ids(5, 9, &mut r), random_ids(5, 9, &mut r), i as u8 % 2))
        .collect();
    let check = gradient_check(&model, &pairs, 1e-5);
    ensure(check.max_rel < 1e-4, || {
        format!("max relative error {:.3e} at {}", check.max_rel, check.worst)
    })?;
    Ok(format!(
        "{} parameters, max relative error {:.2e}",
        check.checked, check.max_rel
    ))
}

fn augmentation() -> Outcome {
    let mut checked = 0;
    for (k, n_pairs) in (50..=500).step_by(50).enumerate() {
        let pairs = class_corpus(n_pairs, n_pairs as u64, 2, k as u64);
        let data = augment_all(&pairs, 100 + k as u64).map_err(|e| e.to_string())?;
        let r = data.report;
        let original_pos = pairs.iter().filter(|p| p.is_positive()).count();
        let distinct = pairs
            .iter()
            .flat_map(|p| [p.qid1, p.qid2])
            .collect::<BTreeSet<_>>()
            .len();
        ensure(r.positives_before_balancing == 2 * original_pos + distinct, || {
            format!(
                "{n_pairs} pairs: {} positives before balancing",
                r.positives_before_balancing
            )
        })?;
        if r.negatives_before_balancing > r.positives_before_balancing {
            continue;
        }
        ensure(r.shortfall == 0 && data.positives() == data.negatives(), || {
            format!("{n_pairs} pairs: ratio {} with shortfall {}", r.ratio(), r.shortfall)
        })?;
        let graph = DuplicateGraph::from_pairs(&pairs);
        for (p, t) in data.pairs.iter().zip(&data.provenance) {
            if *t == Provenance::SampledNegative {
                ensure(graph.common_dup_count(p.qid1, p.qid2) == 0, || {
                    format!("sampled negative ({}, {}) shares a duplicate", p.qid1, p.qid2)
                })?;
            }
        }
        checked += 1;
    }
    ensure(checked == 10, || format!("only {checked} corpora reached balance"))?;
    Ok(format!("{checked} corpora of 50..500 pairs"))
}

fn positive_total() -> Outcome {
    let total = expected_positive_total(149_263, 537_933);
    ensure(total == 836_459, || format!("predicted {total}"))?;
    Ok(format!("{total} positives"))
}

fn overfit() -> Outcome {
    let (corpus, store) = synth_store(&SynthConfig {
        n_train: 32,
        n_clusters: 12,
        ..Default::default()
    });
    let data = encode_pairs(&corpus.train, &store, 8);
    let model = SiameseModel::new(tiny_config(&[8], &[16], 8), store, 1).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 8,
        lr: 0.01,
        keep_prob: 1.0,
        dev_fraction: 0.0,
        ..Default::default()
    };
    let out = train(model, &data, &cfg).map_err(|e| e.to_string())?;
    let (epoch, best) = out
        .history
        .iter()
        .map(|h| (h.epoch, h.train_loss))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    ensure(best < 0.05, || format!("best training loss {best:.4}"))?;
    Ok(format!("training loss {best:.4} at epoch {epoch}"))
}

const WORDS: [&str; 10] = [
    "the", "a", "is", "rust", "learn", "code", "fast", "why", "how", "borrow",
];

fn features() -> Outcome {
    let mut r = rng(99);
    let sentence = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<String> {
        let n = r.gen_range(0..7);
        (0..n).map(|_| WORDS[r.gen_range(0..WORDS.len())].to_string()).collect()
    };
    for case in 0..1000 {
        let stop_list: Vec<&str> = WORDS.iter().copied().filter(|_| r.gen_bool(0.3)).collect();
        let stop_set: HashSet<String> = stop_list.iter().map(|s| s.to_string()).collect();
        let stop = Stopwords::from_words(stop_list.iter().copied());
        let docs: Vec<Vec<String>> = (0..r.gen_range(1..6)).map(|_| sentence(&mut r)).collect();
        let (a, b) = (sentence(&mut r), sentence(&mut r));

        let got = word_match_share(&a, &b, &stop);
        let want = oracle_word_match(&a, &b, &stop_set);
        ensure((got - want).abs() < 1e-12, || {
            format!("word match case {case}: {got} vs {want}")
        })?;

        let idf = IdfTable::build(docs.iter().map(|d| &d[..])).map_err(|e| e.to_string())?;
        let got = tfidf_word_match(&a, &b, &idf, &stop);
        let want = oracle_tfidf_match(&a, &b, &oracle_idf(&docs), &stop_set);
        ensure((got - want).abs() < 1e-12, || {
            format!("tfidf case {case}: {got} vs {want}")
        })?;

        let n_nodes = r.gen_range(2..12u64);
        let edges: Vec<(u64, u64)> = (0..r.gen_range(0..20))
            .map(|_| (r.gen_range(0..n_nodes), r.gen_range(0..n_nodes)))
            .collect();
        let mut graph = DuplicateGraph::default();
        for &(p, q) in &edges {
            graph.add_edge(p, q);
        }
        let (qa, qb) = (r.gen_range(0..n_nodes + 2), r.gen_range(0..n_nodes + 2));
        let got = common_dup_count(qa, qb, &graph);
        let want = oracle_common_dups(&edges, qa, qb, n_nodes);
        ensure(got == want, || format!("common dups case {case}: {got} vs {want}"))?;
    }
    Ok("1000 cases of each feature".into())
}

fn classifiers() -> Outcome {
    let data = linearly_separable(500, 1);
    let forest = rf_fit(&data.x_train, &data.y_train, &ForestParams::default()).map_err(|e| e.to_string())?;
    let rf = accuracy(&probs_of(|r| forest.predict_proba(r), &data.x_test), &data.y_test).unwrap();
    let svm = svm_fit(&data.x_train, &data.y_train, &SvmParams::default()).map_err(|e| e.to_string())?;
    let sv = accuracy(&probs_of(|r| svm.predict_proba(r), &data.x_test), &data.y_test).unwrap();
    let data = axis_separable(500, 2);
    let ada = ada_fit(&data.x_train, &data.y_train, &AdaParams::default()).map_err(|e| e.to_string())?;
    let ad = accuracy(&probs_of(|r| ada.predict_proba(r), &data.x_test), &data.y_test).unwrap();
    let labels = [0u8, 1, 1, 0, 1];
    let perfect: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let ll = log_loss(&perfect, &labels).unwrap();
    let detail = format!("rf {rf:.3}, svm {sv:.3}, adaboost {ad:.3}, perfect log loss {ll:.1e}");
    ensure(rf >= 0.95 && sv >= 0.95 && ad >= 0.90 && ll < 1e-13, || detail.clone())?;
    Ok(detail)
}

fn depth() -> Outcome {
    let mut wins = 0;
    let mut notes = Vec::new();
    for seed in 0..5 {
        let data = noisy(400, 200 + seed, 0.2);
        let loss = |max_depth| {
            let params = ForestParams {
                n_trees: 50,
                max_depth,
                features_per_split: 2,
                seed,
                ..Default::default()
            };
            let f = rf_fit(&data.x_train, &data.y_train, &params).unwrap();
            log_loss(&probs_of(|r| f.predict_proba(r), &data.x_test), &data.y_test).unwrap()
        };
        let unlimited = loss(None);
        let best = (1..=8).map(|d| loss(Some(d))).fold(f64::INFINITY, f64::min);
        if best < unlimited {
            wins += 1;
        }
        notes.push(format!("{best:.3}/{unlimited:.3}"));
    }
    let detail = format!("shallow beat unlimited on {wins} of 5 seeds ({})", notes.join(", "));
    ensure(wins >= 3, || detail.clone())?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let (a, b) = (smoke_copy(), smoke_copy());
    for d in [&a, &b] {
        run_all(&smoke_config(d.path())).map_err(|e| e.to_string())?;
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("work").join(files::SUBMISSION)).unwrap();
    let (sa, sb) = (read(&a), read(&b));
    ensure(sa == sb, || "submissions differ".into())?;
    Ok(format!("{} identical bytes", sa.len()))
}

fn ensemble() -> Outcome {
    let cfg = SynthConfig {
        n_clusters: 120,
        questions_per_cluster: 8,
        n_train: 1500,
        n_test: 500,
        label_noise: 0.05,
        seed: 21,
        ..Default::default()
    };
    let (corpus, store) = synth_store(&cfg);
    let (gru_part, secondary_part) = corpus.train.split_at(1000);

    let augmented = augment_all(gru_part, 5).map_err(|e| e.to_string())?;
    let encoded = encode_pairs(&augmented.pairs, &store, 12);
    let model = SiameseModel::new(tiny_config(&[6], &[8], 12), store, 3).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        epochs: 6,
        batch_size: 32,
        lr: 0.01,
        seed: 3,
        ..Default::default()
    };
    let model = train(model, &encoded, &tc).map_err(|e| e.to_string())?.model;

    let ctx = FeatureContext::from_training(&corpus.train, Stopwords::default()).map_err(|e| e.to_string())?;
    let fit_rows = featurize(secondary_part, &model, &ctx).map_err(|e| e.to_string())?;
    let test_rows = featurize(&corpus.test, &model, &ctx).map_err(|e| e.to_string())?;
    let x: Vec<Vec<f64>> = fit_rows.iter().map(|r| r.features().to_vec()).collect();
    let y: Vec<u8> = fit_rows.iter().map(|r| r.label.unwrap()).collect();
    let forest = rf_fit(
        &x,
        &y,
        &ForestParams {
            n_trees: 100,
            max_depth: Some(6),
            features_per_split: 2,
            seed: 9,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;

    let gru_probs: Vec<f64> = test_rows.iter().map(|r| r.gru_score).collect();
    let rf_probs: Vec<f64> = test_rows.iter().map(|r| forest.predict_proba(&r.features())).collect();
    let gru_loss = log_loss(&gru_probs, &corpus.test_labels).unwrap();
    let rf_loss = log_loss(&rf_probs, &corpus.test_labels).unwrap();
    let detail = format!("ensemble {rf_loss:.4} vs gru alone {gru_loss:.4}");
    ensure(rf_loss <= gru_loss, || detail.clone())?;
    Ok(detail)
}

type Criterion = (&'static str, u64, fn() -> Outcome);

const CRITERIA: [Criterion; 9] = [
    ("gradient correctness", 30, gradients),
    ("augmentation identity", 5, augmentation),
    ("positive total formula", 1, positive_total),
    ("overfit 32 pairs", 120, overfit),
    ("feature oracles", 10, features),
    ("classifier floors", 30, classifiers),
    ("depth regularization", 60, depth),
    ("end-to-end determinism", 120, determinism),
    ("ensemble beats raw score", 300, ensemble),
];

fn main() {
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, budget, run)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(d) if elapsed > Duration::from_secs(*budget) => Err(format!("{d}; over the {budget} s budget")),
            other => other,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if result.is_err() {
            failed += 1;
        }
        println!(
            "criterion {} {tag}: {name} ({detail}; {:.2} s)",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
