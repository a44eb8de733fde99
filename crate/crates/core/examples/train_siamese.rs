//! Trains a small Siamese GRU on augmented synthetic data and scores a few
//! question pairs.
//!
//! ```text
//! cargo run --release --example train_siamese
//! ```

use std::collections::HashSet;
use std::path::Path;

use quesim::augment::augment_all;
use quesim::embedding::read_glove;
use quesim::gru::{train, EncodedPair, ModelConfig, SiameseModel, TrainConfig};
use quesim::synth::{planted_clusters, SynthConfig};
use quesim::text_prep::{encode, tokenize};

fn main() -> quesim::Result<()> {
    let synth = SynthConfig {
        n_train: 600,
        ..Default::default()
    };
    let corpus = planted_clusters(&synth)?;
    let words: HashSet<String> = corpus
        .train
        .iter()
        .chain(&corpus.test)
        .flat_map(|p| {
            tokenize(&p.q1)
                .into_inner()
                .into_iter()
                .chain(tokenize(&p.q2).into_inner())
        })
        .collect();
    let store = read_glove(corpus.glove.as_bytes(), Path::new("synthetic"), synth.embed_dim, &words)?;

    let mut config = ModelConfig::gru(1, 1);
    config.hidden = vec![8];
    config.head = vec![16];
    config.max_len = 12;

    let augmented = augment_all(&corpus.train, 1)?;
    let data = augmented
        .pairs
        .iter()
        .map(|p| {
            Ok(EncodedPair {
                ids1: encode(&tokenize(&p.q1), &store.vocab, config.max_len)?,
                ids2: encode(&tokenize(&p.q2), &store.vocab, config.max_len)?,
                label: p.label.unwrap(),
            })
        })
        .collect::<quesim::Result<Vec<_>>>()?;

    let model = SiameseModel::new(config, store, 3)?;
    println!("{} parameters, {} training pairs", model.n_parameters(), data.len());
    let cfg = TrainConfig {
        epochs: 8,
        lr: 0.01,
        seed: 3,
        ..Default::default()
    };
    let out = train(model, &data, &cfg)?;
    for h in &out.history {
        println!(
            "epoch {:>2}  train {:.4}  dev {:.4}",
            h.epoch,
            h.train_loss,
            h.dev_loss.unwrap_or(f64::NAN)
        );
    }
    println!("kept epoch {}", out.best_epoch);

    for (p, y) in corpus.test.iter().zip(&corpus.test_labels).take(6) {
        let s = out.model.score_texts(&p.q1, &p.q2)?;
        println!("{s:.3} (label {y})  {:?} / {:?}", p.q1, p.q2);
    }
    Ok(())
}
