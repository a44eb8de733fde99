//! Training-set augmentation for the Siamese network: flipped pairs,
//! question self-pairs and balanced negative sampling.
//!
//! Augmented rows feed only the neural trainer; the secondary classifiers
//! see the original pairs.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Provenance, QuestionPair};
use crate::error::{Error, Result};
use crate::features::DuplicateGraph;

/// Above this many distinct questions the exhaustive fallback of the
/// negative sampler is skipped.
const EXHAUSTIVE_LIMIT: usize = 5_000;

/// Each original pair with its questions swapped; labels are kept.
pub fn flip_pairs(pairs: &[QuestionPair]) -> Vec<QuestionPair> {
    pairs
        .iter()
        .map(|p| QuestionPair {
            id: p.id,
            qid1: p.qid2,
            qid2: p.qid1,
            q1: p.q2.clone(),
            q2: p.q1.clone(),
            label: p.label,
        })
        .collect()
}

/// Distinct questions in order of qid, with the first text seen for each.
fn distinct_questions(pairs: &[QuestionPair]) -> BTreeMap<u64, &str> {
    let mut questions = BTreeMap::new();
    for p in pairs {
        questions.entry(p.qid1).or_insert(p.q1.as_str());
        questions.entry(p.qid2).or_insert(p.q2.as_str());
    }
    questions
}

/// One positive `(q, q)` pair per distinct question id.
pub fn self_pairs(pairs: &[QuestionPair]) -> Vec<QuestionPair> {
    distinct_questions(pairs)
        .into_iter()
        .map(|(qid, text)| QuestionPair::labeled(qid, qid, qid, text, text, 1))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    pub pairs: Vec<QuestionPair>,
    /// How many of the requested negatives could not be produced.
    pub shortfall: usize,
}

/// Draws `target` negatives `(a, b)` with `a != b`, no known duplicate edge
/// and no common known duplicate. Deterministic for a given seed.
///
/// Candidates are drawn uniformly with rejection, up to 100 draws per
/// requested pair. If that budget runs out on a small corpus, the remaining
/// valid pairs are enumerated so that every available negative is used
/// before a shortfall is reported.
pub fn sample_negatives(pairs: &[QuestionPair], graph: &DuplicateGraph, target: usize, seed: u64) -> NegativeSample {
    let questions: Vec<(u64, &str)> = distinct_questions(pairs).into_iter().collect();
    let n = questions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emitted: HashSet<(u64, u64)> = HashSet::new();
    let mut out = Vec::with_capacity(target);

    let valid = |a: u64, b: u64, emitted: &HashSet<(u64, u64)>| {
        a != b && !graph.has_edge(a, b) && graph.common_dup_count(a, b) == 0 && !emitted.contains(&(a.min(b), a.max(b)))
    };
    let make = |a: usize, b: usize| {
        let (qa, ta) = questions[a];
        let (qb, tb) = questions[b];
        QuestionPair::labeled(0, qa, qb, ta, tb, 0)
    };

    if n >= 2 {
        let budget = target.saturating_mul(100);
        let mut attempts = 0usize;
        while out.len() < target && attempts < budget {
            attempts += 1;
            let i = rng.gen_range(0..n);
            let j = rng.gen_range(0..n);
            let (a, b) = (questions[i].0, questions[j].0);
            if valid(a, b, &emitted) {
                emitted.insert((a.min(b), a.max(b)));
                out.push(make(i, j));
            }
        }

        if out.len() < target && n <= EXHAUSTIVE_LIMIT {
            let mut rest = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if valid(questions[i].0, questions[j].0, &emitted) {
                        rest.push((i, j));
                    }
                }
            }
            rest.shuffle(&mut rng);
            for (i, j) in rest.into_iter().take(target - out.len()) {
                let (i, j) = if rng.gen_bool(0.5) { (i, j) } else { (j, i) };
                out.push(make(i, j));
            }
        }
    }

    NegativeSample {
        shortfall: target - out.len(),
        pairs: out,
    }
}

/// Counts before and after balancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AugmentReport {
    pub original: usize,
    pub flipped: usize,
    pub self_pairs: usize,
    pub sampled_negatives: usize,
    /// Positives after flipping and self-pairing, before sampling.
    pub positives_before_balancing: usize,
    pub negatives_before_balancing: usize,
    pub positives: usize,
    pub negatives: usize,
    pub shortfall: usize,
}

impl AugmentReport {
    pub fn total(&self) -> usize {
        self.positives + self.negatives
    }

    pub fn ratio(&self) -> f64 {
        self.positives as f64 / self.negatives as f64
    }
}

#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    pub pairs: Vec<QuestionPair>,
    pub provenance: Vec<Provenance>,
    pub seed: u64,
    pub report: AugmentReport,
}

impl AugmentedDataset {
    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.is_positive()).count()
    }

    pub fn negatives(&self) -> usize {
        self.pairs.len() - self.positives()
    }
}

/// Positive count the augmentation yields before balancing:
/// originals and their flips, plus one self pair per distinct question.
pub fn expected_positive_total(original_positives: usize, distinct_questions: usize) -> usize {
    2 * original_positives + distinct_questions
}

/// Full augmentation: originals, flips of every original pair, self pairs,
/// then sampled negatives until both classes have the same size.
///
/// Original rows keep their ids; generated rows are numbered after the
/// largest original id.
pub fn augment_all(pairs: &[QuestionPair], seed: u64) -> Result<AugmentedDataset> {
    if let Some(p) = pairs.iter().find(|p| p.label.is_none()) {
        return Err(Error::Data(format!(
            "pair {} has no label; augmentation needs labeled data",
            p.id
        )));
    }

    let flipped = flip_pairs(pairs);
    let selfs = self_pairs(pairs);
    let mut out: Vec<QuestionPair> = Vec::with_capacity(pairs.len() * 4);
    let mut tags = Vec::with_capacity(pairs.len() * 4);
    let push = |rows: Vec<QuestionPair>, tag: Provenance, out: &mut Vec<_>, tags: &mut Vec<_>| {
        tags.extend(std::iter::repeat_n(tag, rows.len()));
        out.extend(rows);
    };
    push(pairs.to_vec(), Provenance::Original, &mut out, &mut tags);
    push(flipped, Provenance::Flipped, &mut out, &mut tags);
    push(selfs, Provenance::SelfPair, &mut out, &mut tags);

    let positives_before = out.iter().filter(|p| p.is_positive()).count();
    let negatives_before = out.len() - positives_before;
    let target = positives_before.saturating_sub(negatives_before);

    let graph = DuplicateGraph::from_pairs(pairs);
    let sample = sample_negatives(pairs, &graph, target, seed);
    let sampled = sample.pairs.len();
    push(sample.pairs, Provenance::SampledNegative, &mut out, &mut tags);

    let first_new = pairs.iter().map(|p| p.id + 1).max().unwrap_or(0);
    for (id, p) in (first_new..).zip(out.iter_mut().skip(pairs.len())) {
        p.id = id;
    }

    let report = AugmentReport {
        original: pairs.len(),
        flipped: pairs.len(),
        self_pairs: tags.iter().filter(|t| **t == Provenance::SelfPair).count(),
        sampled_negatives: sampled,
        positives_before_balancing: positives_before,
        negatives_before_balancing: negatives_before,
        positives: positives_before,
        negatives: negatives_before + sampled,
        shortfall: sample.shortfall,
    };
    if report.shortfall > 0 {
        log::warn!(
            "negative sampling fell {} short of {}; final ratio {:.3}",
            report.shortfall,
            target,
            report.ratio()
        );
    }
    Ok(AugmentedDataset {
        pairs: out,
        provenance: tags,
        seed,
        report,
    })
}
