//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use quesim::embedding::{EmbeddingStore, Vocabulary, PAD_ID};
use quesim::gru::{bce_loss, EncodedPair, JoinMode, Mode, ModelConfig, SiameseModel};
use quesim::synth::{planted_clusters, SynthConfig};
use quesim::tensor::Matrix;
use quesim::text_prep::{encode, tokenize, IdSeq};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Store over words `w0..w{n-3}` with uniform(−1, 1) rows.
pub fn random_store(n_words: usize, dim: usize, seed: u64) -> EmbeddingStore {
    let vocab = Vocabulary::from_words((0..n_words - 2).map(|i| format!("w{i}")));
    let mut r = rng(seed);
    let mut m = Matrix::zeros(n_words, dim);
    for row in 1..n_words {
        for v in m.row_mut(row) {
            *v = r.gen_range(-1.0..1.0);
        }
    }
    EmbeddingStore::new(vocab, m).unwrap()
}

pub fn tiny_config(hidden: &[usize], head: &[usize], max_len: usize) -> ModelConfig {
    ModelConfig {
        hidden: hidden.to_vec(),
        head: head.to_vec(),
        join: JoinMode::Full,
        max_len,
        freeze_embeddings: false,
    }
}

/// Model whose every parameter, biases included, is uniform(−0.5, 0.5).
pub fn random_model(config: ModelConfig, n_words: usize, dim: usize, seed: u64) -> SiameseModel {
    let mut model = SiameseModel::new(config, random_store(n_words, dim, seed), seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for t in model.tensors_mut().into_iter().skip(1) {
        for v in t.data.iter_mut() {
            *v = r.gen_range(-0.5..0.5);
        }
    }
    model
}

/// Random ids of length `len` with up to two leading PADs.
pub fn random_ids<R: Rng>(len: usize, n_words: usize, r: &mut R) -> Vec<u32> {
    let pads = r.gen_range(0..=2.min(len - 1));
    (0..len)
        .map(|t| {
            if t < pads {
                PAD_ID
            } else {
                r.gen_range(1..n_words as u32)
            }
        })
        .collect()
}

pub struct GradCheck {
    pub max_rel: f64,
    pub checked: usize,
    pub worst: String,
}

/// Compares the analytic gradient of the summed evaluation-mode loss over
/// `pairs` with central differences on every trainable parameter.
///
/// The relative error of one entry is `|a − n| / max(|a|, |n|, 1e-6)`.
/// Frozen embedding rows must have an exactly zero analytic gradient.
pub fn gradient_check(model: &SiameseModel, pairs: &[(Vec<u32>, Vec<u32>, u8)], eps: f64) -> GradCheck {
    let loss = |m: &SiameseModel| -> f64 {
        pairs
            .iter()
            .map(|(a, b, y)| bce_loss(m.forward_pair(a, b, Mode::Eval).unwrap().y_hat, *y))
            .sum()
    };
    let mut grads = model.zero_gradients();
    for (a, b, y) in pairs {
        let cache = model.forward_pair(a, b, Mode::Eval).unwrap();
        model.accumulate_gradients(&cache, *y, 1.0, &mut grads);
    }
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|t| (t.name, t.data.to_vec())).collect();
    let dim = model.embeddings.dim();

    let mut probe = model.clone();
    let mut out = GradCheck {
        max_rel: 0.0,
        checked: 0,
        worst: String::new(),
    };
    for (ti, (name, grad)) in analytic.iter().enumerate() {
        for (j, &a) in grad.iter().enumerate() {
            if ti == 0 && !model.embeddings.is_trainable((j / dim) as u32) {
                assert_eq!(a, 0.0, "frozen embedding row {} has a gradient", j / dim);
                continue;
            }
            let orig = probe.tensors()[ti].data[j];
            probe.tensors_mut()[ti].data[j] = orig + eps;
            let up = loss(&probe);
            probe.tensors_mut()[ti].data[j] = orig - eps;
            let down = loss(&probe);
            probe.tensors_mut()[ti].data[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            out.checked += 1;
            if rel > out.max_rel {
                out.max_rel = rel;
                out.worst = format!("{name}[{j}]: analytic {a:e}, numeric {numeric:e}");
            }
        }
    }
    out
}

/// Encodes labeled pairs against a store.
pub fn encode_pairs(
    pairs: &[quesim::dataset::QuestionPair],
    store: &EmbeddingStore,
    max_len: usize,
) -> Vec<EncodedPair> {
    pairs
        .iter()
        .map(|p| EncodedPair {
            ids1: encode(&tokenize(&p.q1), &store.vocab, max_len).unwrap(),
            ids2: encode(&tokenize(&p.q2), &store.vocab, max_len).unwrap(),
            label: p.label.unwrap(),
        })
        .collect()
}

/// Store for a synthetic corpus, read from its generated vector file.
pub fn synth_store(cfg: &SynthConfig) -> (quesim::synth::SynthCorpus, EmbeddingStore) {
    let corpus = planted_clusters(cfg).unwrap();
    let mut words = HashSet::new();
    for p in corpus.train.iter().chain(&corpus.test) {
        words.extend(tokenize(&p.q1).into_inner());
        words.extend(tokenize(&p.q2).into_inner());
    }
    let store = quesim::embedding::read_glove(
        corpus.glove.as_bytes(),
        std::path::Path::new("synthetic"),
        cfg.embed_dim,
        &words,
    )
    .unwrap();
    (corpus, store)
}

pub fn ids(seq: &IdSeq) -> &[u32] {
    seq
}

// Brute-force reference implementations, written independently of the
// library's feature code.

pub fn oracle_word_match(a: &[String], b: &[String], stop: &HashSet<String>) -> f64 {
    let a: Vec<&String> = a.iter().filter(|w| !stop.contains(*w)).collect();
    let b: Vec<&String> = b.iter().filter(|w| !stop.contains(*w)).collect();
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut shared = 0usize;
    for x in &a {
        if b.iter().any(|y| y == x) {
            shared += 1;
        }
    }
    for y in &b {
        if a.iter().any(|x| x == y) {
            shared += 1;
        }
    }
    shared as f64 / (a.len() + b.len()) as f64
}

pub fn oracle_idf(docs: &[Vec<String>]) -> HashMap<String, f64> {
    let n = docs.len() as f64;
    let mut vocab = BTreeSet::new();
    for d in docs {
        vocab.extend(d.iter().cloned());
    }
    vocab
        .into_iter()
        .map(|w| {
            let df = docs.iter().filter(|d| d.contains(&w)).count() as f64;
            let weight = (n / (1.0 + df)).ln();
            (w, if weight > 0.0 { weight } else { 0.0 })
        })
        .collect()
}

pub fn oracle_tfidf_match(a: &[String], b: &[String], idf: &HashMap<String, f64>, stop: &HashSet<String>) -> f64 {
    let weight = |w: &String| idf.get(w).copied().unwrap_or(0.0);
    let a: Vec<&String> = a.iter().filter(|w| !stop.contains(*w)).collect();
    let b: Vec<&String> = b.iter().filter(|w| !stop.contains(*w)).collect();
    let total: f64 = a.iter().chain(&b).map(|w| weight(w)).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut shared = 0.0;
    for x in &a {
        if b.contains(x) {
            shared += weight(x);
        }
    }
    for y in &b {
        if a.contains(y) {
            shared += weight(y);
        }
    }
    shared / total
}

/// Shared neighbours of `a` and `b` in an undirected edge list, by scanning
/// every candidate node.
pub fn oracle_common_dups(edges: &[(u64, u64)], a: u64, b: u64, n_nodes: u64) -> usize {
    let adjacent = |x: u64, y: u64| x != y && edges.iter().any(|&(p, q)| (p == x && q == y) || (p == y && q == x));
    (0..n_nodes)
        .filter(|&c| c != a && c != b && adjacent(a, c) && adjacent(b, c))
        .count()
}

// Synthetic classifier data.

pub struct Split {
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<u8>,
    pub x_test: Vec<Vec<f64>>,
    pub y_test: Vec<u8>,
}

/// Draws `2n` rows from `label_of` over uniform(−1, 1)^4 and splits them
/// in half. Rows for which `label_of` returns `None` are redrawn.
pub fn rows_split(n: usize, seed: u64, label_of: impl Fn(&[f64], &mut ChaCha8Rng) -> Option<u8>) -> Split {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(2 * n);
    while x.len() < 2 * n {
        let row: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        if let Some(label) = label_of(&row, &mut r) {
            x.push(row);
            y.push(label);
        }
    }
    let x_test = x.split_off(n);
    let y_test = y.split_off(n);
    Split {
        x_train: x,
        y_train: y,
        x_test,
        y_test,
    }
}

/// Separated by an oblique hyperplane with a margin of 0.05.
pub fn linearly_separable(n: usize, seed: u64) -> Split {
    rows_split(n, seed, |x, _| {
        let s = 1.0 * x[0] - 0.7 * x[1] + 0.5 * x[2] + 0.3 * x[3] - 0.1;
        (s.abs() > 0.05).then_some(u8::from(s > 0.0))
    })
}

/// Separated by a threshold on the second feature.
pub fn axis_separable(n: usize, seed: u64) -> Split {
    rows_split(n, seed, |x, _| Some(u8::from(x[1] > 0.2)))
}

/// Oblique boundary with a share `noise` of labels flipped.
pub fn noisy(n: usize, seed: u64, noise: f64) -> Split {
    rows_split(n, seed, move |x, r| {
        let clean = u8::from(x[0] + 0.5 * x[1] - 0.3 * x[2] > 0.0);
        Some(if r.gen_bool(noise) { 1 - clean } else { clean })
    })
}

pub fn probs_of(predict: impl Fn(&[f64]) -> f64, x: &[Vec<f64>]) -> Vec<f64> {
    x.iter().map(|r| predict(r)).collect()
}

/// Labeled pairs over `n_questions` qids where questions are duplicates
/// exactly when `qid % n_classes` agrees.
pub fn class_corpus(n_pairs: usize, n_questions: u64, n_classes: u64, seed: u64) -> Vec<quesim::dataset::QuestionPair> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(n_pairs);
    while out.len() < n_pairs {
        let a = r.gen_range(0..n_questions);
        let b = r.gen_range(0..n_questions);
        if a == b {
            continue;
        }
        let label = u8::from(a % n_classes == b % n_classes);
        out.push(quesim::dataset::QuestionPair::labeled(
            out.len() as u64,
            a,
            b,
            &format!("question {a}"),
            &format!("question {b}"),
            label,
        ));
    }
    out
}

// Smoke corpus helpers.

pub fn smoke_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/smoke")
}

/// Copies the smoke inputs and config into a fresh directory.
pub fn smoke_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["train.csv", "test.csv", "test_labels.csv", "glove.txt", "config.toml"] {
        std::fs::copy(smoke_dir().join(f), dir.path().join(f)).unwrap();
    }
    dir
}

pub fn smoke_config(dir: &std::path::Path) -> quesim::pipeline::PipelineConfig {
    quesim::pipeline::PipelineConfig::load(dir.join("config.toml")).unwrap()
}
