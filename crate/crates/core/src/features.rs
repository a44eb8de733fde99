//! Engineered pair features and the duplicate graph.
//!
//! Overlap features count token multiplicity on the numerator side but test
//! membership against the other question's token *set*, so both stay in
//! `[0, 1]`. IDF weights are `max(0, ln(n_docs / (1 + df)))` over distinct
//! questions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;

use crate::dataset::QuestionPair;
use crate::error::{Error, Result};
use crate::gru::SiameseModel;
use crate::text_prep::tokenize;

/// Built-in stopword list (57 English function words).
pub const DEFAULT_STOPWORDS: [&str; 57] = [
    "a", "an", "the", "and", "or", "but", "if", "of", "at", "by", "for", "with", "about", "to", "from", "in", "on",
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "have", "has", "had", "i", "me",
    "my", "you", "your", "he", "she", "it", "its", "we", "they", "them", "their", "this", "that", "these", "those",
    "there", "as", "so", "than", "too", "very", "can", "will", "just",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Stopwords(DEFAULT_STOPWORDS.iter().map(|w| w.to_string()).collect())
    }
}

impl Stopwords {
    pub fn none() -> Self {
        Stopwords(HashSet::new())
    }

    pub fn from_words<I: IntoIterator<Item = S>, S: Into<String>>(words: I) -> Self {
        Stopwords(words.into_iter().map(Into::into).collect())
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Stopwords::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase),
        ))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    fn filter<'a>(&self, tokens: &'a [String]) -> Vec<&'a str> {
        tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !self.contains(t))
            .collect()
    }
}

/// Generic overlap: each filtered token found in the other question's set
/// contributes its weight; normalised by the total weight of both lists.
fn weighted_overlap(t1: &[String], t2: &[String], stopwords: &Stopwords, weight: impl Fn(&str) -> f64) -> f64 {
    let a = stopwords.filter(t1);
    let b = stopwords.filter(t2);
    let set_a: HashSet<&str> = a.iter().copied().collect();
    let set_b: HashSet<&str> = b.iter().copied().collect();

    let sum = |tokens: &[&str], other: Option<&HashSet<&str>>| -> f64 {
        tokens
            .iter()
            .filter(|w| other.is_none_or(|o| o.contains(*w)))
            .map(|w| weight(w))
            .sum()
    };
    // Each side is summed on its own so that swapping the questions only
    // swaps the operands of two-term additions and the result is exactly
    // symmetric.
    let shared = sum(&a, Some(&set_b)) + sum(&b, Some(&set_a));
    let total = sum(&a, None) + sum(&b, None);
    if total > 0.0 {
        (shared / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn word_match_share(t1: &[String], t2: &[String], stopwords: &Stopwords) -> f64 {
    weighted_overlap(t1, t2, stopwords, |_| 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    weights: HashMap<String, f64>,
    n_docs: usize,
}

impl IdfTable {
    /// Builds weights from the token lists of distinct questions.
    pub fn build<'a, I>(corpus: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut n_docs = 0usize;
        for doc in corpus {
            n_docs += 1;
            let unique: HashSet<&String> = doc.iter().collect();
            for w in unique {
                *df.entry(w.clone()).or_default() += 1;
            }
        }
        if n_docs == 0 {
            return Err(Error::Data("cannot build IDF weights from an empty corpus".into()));
        }
        let weights = df
            .into_iter()
            .map(|(w, d)| (w, (n_docs as f64 / (1.0 + d as f64)).ln().max(0.0)))
            .collect();
        Ok(IdfTable { weights, n_docs })
    }

    pub fn from_weights(weights: HashMap<String, f64>, n_docs: usize) -> Self {
        IdfTable { weights, n_docs }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Zero for words never seen while building.
    pub fn weight(&self, word: &str) -> f64 {
        self.weights.get(word).copied().unwrap_or(0.0)
    }
}

pub fn tfidf_word_match(t1: &[String], t2: &[String], idf: &IdfTable, stopwords: &Stopwords) -> f64 {
    weighted_overlap(t1, t2, stopwords, |w| idf.weight(w))
}

/// Undirected graph of known duplicates, keyed by question id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DuplicateGraph {
    adjacency: BTreeMap<u64, BTreeSet<u64>>,
}

impl DuplicateGraph {
    /// Edges from the positive labels of `pairs`; self pairs are skipped.
    pub fn from_pairs(pairs: &[QuestionPair]) -> Self {
        let mut graph = DuplicateGraph::default();
        for p in pairs.iter().filter(|p| p.is_positive()) {
            graph.add_edge(p.qid1, p.qid2);
        }
        graph
    }

    pub fn add_edge(&mut self, a: u64, b: u64) {
        if a == b {
            return;
        }
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
    }

    pub fn neighbors(&self, q: u64) -> Option<&BTreeSet<u64>> {
        self.adjacency.get(&q)
    }

    pub fn has_edge(&self, a: u64, b: u64) -> bool {
        self.adjacency.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    /// Number of questions known to be duplicates of both `a` and `b`.
    pub fn common_dup_count(&self, a: u64, b: u64) -> usize {
        match (self.adjacency.get(&a), self.adjacency.get(&b)) {
            (Some(na), Some(nb)) => {
                let (small, large) = if na.len() <= nb.len() { (na, nb) } else { (nb, na) };
                small
                    .iter()
                    .filter(|&&q| q != a && q != b && large.contains(&q))
                    .count()
            }
            _ => 0,
        }
    }
}

pub fn common_dup_count(qid1: u64, qid2: u64, graph: &DuplicateGraph) -> usize {
    graph.common_dup_count(qid1, qid2)
}

/// Input row of the secondary classifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub id: u64,
    pub gru_score: f64,
    pub word_match: f64,
    pub tfidf_match: f64,
    pub common_dups: usize,
    pub label: Option<u8>,
}

impl FeatureRow {
    pub const N_FEATURES: usize = 4;

    pub fn features(&self) -> [f64; 4] {
        [
            self.gru_score,
            self.word_match,
            self.tfidf_match,
            self.common_dups as f64,
        ]
    }
}

/// Training-side statistics the features depend on.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub graph: DuplicateGraph,
    pub idf: IdfTable,
    pub stopwords: Stopwords,
}

impl FeatureContext {
    /// Graph from the positive labels and IDF over the distinct questions
    /// of the original training pairs.
    pub fn from_training(pairs: &[QuestionPair], stopwords: Stopwords) -> Result<Self> {
        let graph = DuplicateGraph::from_pairs(pairs);
        let mut seen = HashSet::new();
        let mut docs = Vec::new();
        for p in pairs {
            for (qid, text) in [(p.qid1, &p.q1), (p.qid2, &p.q2)] {
                if seen.insert(qid) {
                    docs.push(tokenize(text));
                }
            }
        }
        let idf = IdfTable::build(docs.iter().map(|d| &d[..]))?;
        Ok(FeatureContext { graph, idf, stopwords })
    }

    /// The three engineered features, without the model score.
    pub fn hand_features(&self, pair: &QuestionPair) -> (f64, f64, usize) {
        let t1 = tokenize(&pair.q1);
        let t2 = tokenize(&pair.q2);
        (
            word_match_share(&t1, &t2, &self.stopwords),
            tfidf_word_match(&t1, &t2, &self.idf, &self.stopwords),
            self.graph.common_dup_count(pair.qid1, pair.qid2),
        )
    }
}

/// One row per pair, in input order. Pairs are scored in parallel with the
/// model in evaluation mode.
pub fn featurize(pairs: &[QuestionPair], model: &SiameseModel, ctx: &FeatureContext) -> Result<Vec<FeatureRow>> {
    pairs
        .par_iter()
        .map(|p| {
            let gru_score = model.score_texts(&p.q1, &p.q2)?;
            let (word_match, tfidf_match, common_dups) = ctx.hand_features(p);
            Ok(FeatureRow {
                id: p.id,
                gru_score,
                word_match,
                tfidf_match,
                common_dups,
                label: p.label,
            })
        })
        .collect()
}
