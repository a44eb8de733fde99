//! Synthetic question-pair corpora with planted duplicate clusters.
//!
//! Each cluster owns a small topic of content words; its questions are short
//! templated sentences drawn from that topic. Pairs within a cluster are
//! duplicates. Clusters come in sibling pairs that share half their topic,
//! which makes some negatives lexically close. A GloVe-format vector file
//! covering most of the vocabulary is generated alongside.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_pairs, write_test_pairs, QuestionPair};
use crate::error::{Error, Result};

const PREFIXES: [&str; 6] = ["what is", "how do i", "why is", "what are the", "how can i", "where is"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_clusters: usize,
    pub questions_per_cluster: usize,
    pub words_per_topic: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub positive_rate: f64,
    /// Fraction of labels flipped after generation.
    pub label_noise: f64,
    pub embed_dim: usize,
    /// Fraction of content words left out of the vector file.
    pub missing_vectors: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_clusters: 40,
            questions_per_cluster: 6,
            words_per_topic: 4,
            n_train: 100,
            n_test: 40,
            positive_rate: 0.4,
            label_noise: 0.0,
            embed_dim: 8,
            missing_vectors: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train: Vec<QuestionPair>,
    /// Test pairs, labels stripped.
    pub test: Vec<QuestionPair>,
    pub test_labels: Vec<u8>,
    /// GloVe-format text.
    pub glove: String,
}

struct Question {
    qid: u64,
    text: String,
}

fn make_question<R: Rng>(topic: &[String], noise: &[String], rng: &mut R) -> String {
    let prefix = PREFIXES[rng.gen_range(0..PREFIXES.len())];
    let keep = topic.len().saturating_sub(1).max(1);
    let mut words: Vec<&str> = topic.choose_multiple(rng, keep).map(String::as_str).collect();
    if rng.gen_bool(0.3) {
        words.push(&noise[rng.gen_range(0..noise.len())]);
    }
    words.shuffle(rng);
    format!("{} {}?", prefix, words.join(" "))
}

pub fn planted_clusters(cfg: &SynthConfig) -> Result<SynthCorpus> {
    if cfg.n_clusters < 2 || cfg.questions_per_cluster < 2 || cfg.words_per_topic < 2 {
        return Err(Error::Config(
            "synthetic corpus needs at least 2 clusters, 2 questions per cluster and 2 topic words".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = cfg.words_per_topic / 2;

    // Sibling clusters 2k and 2k+1 share their first `half` topic words.
    let mut next_word = 0usize;
    let mut fresh = |n: usize| {
        let words: Vec<String> = (next_word..next_word + n).map(|i| format!("w{i}")).collect();
        next_word += n;
        words
    };
    let mut topics: Vec<Vec<String>> = Vec::with_capacity(cfg.n_clusters);
    for c in 0..cfg.n_clusters {
        if c % 2 == 1 {
            let mut topic = topics[c - 1][..half].to_vec();
            topic.extend(fresh(cfg.words_per_topic - half));
            topics.push(topic);
        } else {
            topics.push(fresh(cfg.words_per_topic));
        }
    }
    let noise = fresh(cfg.n_clusters.max(8));

    let mut qid = 0u64;
    let clusters: Vec<Vec<Question>> = topics
        .iter()
        .map(|topic| {
            (0..cfg.questions_per_cluster)
                .map(|_| {
                    qid += 1;
                    Question {
                        qid,
                        text: make_question(topic, &noise, &mut rng),
                    }
                })
                .collect()
        })
        .collect();

    let draw_pair = |id: u64, rng: &mut ChaCha8Rng| {
        let c1 = rng.gen_range(0..cfg.n_clusters);
        let positive = rng.gen_bool(cfg.positive_rate);
        let (a, b) = if positive {
            let picks: Vec<&Question> = clusters[c1].choose_multiple(rng, 2).collect();
            (picks[0], picks[1])
        } else {
            let sibling = c1 ^ 1;
            let c2 = if sibling < cfg.n_clusters && rng.gen_bool(0.5) {
                sibling
            } else {
                let mut c2 = rng.gen_range(0..cfg.n_clusters - 1);
                if c2 >= c1 {
                    c2 += 1;
                }
                c2
            };
            (
                clusters[c1].choose(rng).expect("nonempty cluster"),
                clusters[c2].choose(rng).expect("nonempty cluster"),
            )
        };
        let mut label = u8::from(positive);
        if cfg.label_noise > 0.0 && rng.gen_bool(cfg.label_noise) {
            label = 1 - label;
        }
        QuestionPair::labeled(id, a.qid, b.qid, &a.text, &b.text, label)
    };

    let train: Vec<QuestionPair> = (0..cfg.n_train as u64).map(|i| draw_pair(i, &mut rng)).collect();
    let mut test = Vec::with_capacity(cfg.n_test);
    let mut test_labels = Vec::with_capacity(cfg.n_test);
    for i in 0..cfg.n_test as u64 {
        let mut p = draw_pair(i, &mut rng);
        test_labels.push(p.label.take().expect("generated pairs are labeled"));
        test.push(p);
    }

    let mut vocab: BTreeSet<String> = topics.iter().flatten().cloned().collect();
    vocab.extend(noise.iter().cloned());
    let mut glove = String::new();
    let always: Vec<String> = PREFIXES
        .iter()
        .flat_map(|p| p.split(' '))
        .map(String::from)
        .chain(std::iter::once("?".to_string()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    for word in always.iter().chain(vocab.iter()) {
        let listed = always.contains(word) || !rng.gen_bool(cfg.missing_vectors);
        if !listed {
            continue;
        }
        glove.push_str(word);
        for _ in 0..cfg.embed_dim {
            let v: f64 = rng.gen_range(-1.0..1.0);
            write!(glove, " {v:.6}").expect("writing to a String");
        }
        glove.push('\n');
    }

    Ok(SynthCorpus {
        train,
        test,
        test_labels,
        glove,
    })
}

impl SynthCorpus {
    /// Writes `train.csv`, `test.csv`, `test_labels.csv` and `glove.txt`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_pairs(dir.join("train.csv"), &self.train, None)?;
        write_test_pairs(dir.join("test.csv"), &self.test)?;
        let mut labels = String::from("test_id,is_duplicate\n");
        for (p, y) in self.test.iter().zip(&self.test_labels) {
            writeln!(labels, "{},{}", p.id, y).expect("writing to a String");
        }
        let path = dir.join("test_labels.csv");
        std::fs::write(&path, labels).map_err(|e| Error::io(&path, e))?;
        let path = dir.join("glove.txt");
        std::fs::write(&path, &self.glove).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}
