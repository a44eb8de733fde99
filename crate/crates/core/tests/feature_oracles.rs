mod common;

use std::collections::HashSet;

use common::*;
use proptest::prelude::*;
use quesim::dataset::QuestionPair;
use quesim::features::{
    common_dup_count, tfidf_word_match, word_match_share, DuplicateGraph, FeatureContext, IdfTable, Stopwords,
};
use rand::Rng;

const WORDS: [&str; 10] = [
    "the", "a", "is", "rust", "learn", "code", "fast", "why", "how", "borrow",
];

fn random_sentence<R: Rng>(r: &mut R) -> Vec<String> {
    let n = r.gen_range(0..7);
    (0..n).map(|_| WORDS[r.gen_range(0..WORDS.len())].to_string()).collect()
}

#[test]
fn overlap_features_match_brute_force_on_1000_cases() {
    let mut r = rng(2024);
    for case in 0..1000 {
        let stop_list: Vec<&str> = WORDS.iter().copied().filter(|_| r.gen_bool(0.3)).collect();
        let stop_set: HashSet<String> = stop_list.iter().map(|s| s.to_string()).collect();
        let stop = Stopwords::from_words(stop_list.iter().copied());
        let docs: Vec<Vec<String>> = (0..r.gen_range(1..6)).map(|_| random_sentence(&mut r)).collect();
        let a = random_sentence(&mut r);
        let b = random_sentence(&mut r);

        let got = word_match_share(&a, &b, &stop);
        let want = oracle_word_match(&a, &b, &stop_set);
        assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}");

        let idf = IdfTable::build(docs.iter().map(|d| &d[..])).unwrap();
        let got = tfidf_word_match(&a, &b, &idf, &stop);
        let want = oracle_tfidf_match(&a, &b, &oracle_idf(&docs), &stop_set);
        assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}");
    }
}

#[test]
fn common_dup_count_matches_brute_force_on_1000_cases() {
    let mut r = rng(7);
    for case in 0..1000 {
        let n_nodes = r.gen_range(2..12u64);
        let edges: Vec<(u64, u64)> = (0..r.gen_range(0..20))
            .map(|_| (r.gen_range(0..n_nodes), r.gen_range(0..n_nodes)))
            .collect();
        let mut graph = DuplicateGraph::default();
        for &(p, q) in &edges {
            graph.add_edge(p, q);
        }
        let a = r.gen_range(0..n_nodes + 2);
        let b = r.gen_range(0..n_nodes + 2);
        let got = common_dup_count(a, b, &graph);
        assert_eq!(got, oracle_common_dups(&edges, a, b, n_nodes), "case {case}");
        assert_eq!(got, common_dup_count(b, a, &graph));
    }
}

#[test]
fn twenty_node_graph_is_exhaustively_correct() {
    let mut r = rng(20);
    let edges: Vec<(u64, u64)> = (0..40).map(|_| (r.gen_range(0..20), r.gen_range(0..20))).collect();
    let pairs: Vec<QuestionPair> = edges
        .iter()
        .enumerate()
        .map(|(i, &(p, q))| QuestionPair::labeled(i as u64, p, q, "x", "y", 1))
        .collect();
    let graph = DuplicateGraph::from_pairs(&pairs);
    for a in 0..20 {
        for b in 0..20 {
            assert_eq!(graph.common_dup_count(a, b), oracle_common_dups(&edges, a, b, 20));
        }
    }
}

#[test]
fn three_question_corpus_with_hand_built_idf() {
    let docs: Vec<Vec<String>> = ["how to learn rust", "learn go fast", "why rust"]
        .iter()
        .map(|s| s.split(' ').map(String::from).collect())
        .collect();
    let idf = IdfTable::build(docs.iter().map(|d| &d[..])).unwrap();
    // n = 3: df 1 words weigh ln(1.5); df 2 words weigh ln(1) = 0.
    assert!((idf.weight("how") - 1.5f64.ln()).abs() < 1e-15);
    assert_eq!(idf.weight("rust"), 0.0);
    let a = docs[0].clone();
    let b = docs[2].clone();
    let got = tfidf_word_match(&a, &b, &idf, &Stopwords::none());
    let want = oracle_tfidf_match(&a, &b, &oracle_idf(&docs), &HashSet::new());
    assert_eq!(got, want);
    assert_eq!(got, 0.0);
}

/// Labels generated from an equivalence relation: questions are duplicates
/// exactly when they share a class.
#[test]
fn shared_duplicates_imply_duplicate_under_transitive_labels() {
    let mut r = rng(31);
    let class_of = |q: u64| q % 7;
    let mut pairs = Vec::new();
    for id in 0..400 {
        let a = r.gen_range(0..70u64);
        let b = r.gen_range(0..70u64);
        if a == b {
            continue;
        }
        let label = u8::from(class_of(a) == class_of(b));
        pairs.push(QuestionPair::labeled(id, a, b, "x", "y", label));
    }
    let graph = DuplicateGraph::from_pairs(&pairs);
    let mut hits = 0;
    for a in 0..70 {
        for b in 0..70 {
            if a != b && graph.common_dup_count(a, b) > 0 {
                hits += 1;
                assert_eq!(class_of(a), class_of(b), "{a} and {b}");
            }
        }
    }
    assert!(hits > 0);
}

#[test]
fn featurized_row_is_assembled_from_its_components() {
    let (corpus, store) = synth_store(&quesim::synth::SynthConfig::default());
    let model = quesim::gru::SiameseModel::new(tiny_config(&[3], &[4], 8), store, 0).unwrap();
    let ctx = FeatureContext::from_training(&corpus.train, Stopwords::default()).unwrap();
    let rows = quesim::features::featurize(&corpus.train, &model, &ctx).unwrap();
    let stop: HashSet<String> = quesim::features::DEFAULT_STOPWORDS
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut seen = HashSet::new();
    let docs: Vec<Vec<String>> = corpus
        .train
        .iter()
        .flat_map(|p| [(p.qid1, &p.q1), (p.qid2, &p.q2)])
        .filter(|(q, _)| seen.insert(*q))
        .map(|(_, t)| quesim::text_prep::tokenize(t).into_inner())
        .collect();
    let idf = oracle_idf(&docs);
    let edges: Vec<(u64, u64)> = corpus
        .train
        .iter()
        .filter(|p| p.is_positive())
        .map(|p| (p.qid1, p.qid2))
        .collect();
    let max_qid = corpus.train.iter().map(|p| p.qid1.max(p.qid2)).max().unwrap() + 1;
    for (p, row) in corpus.train.iter().zip(&rows) {
        let a = quesim::text_prep::tokenize(&p.q1).into_inner();
        let b = quesim::text_prep::tokenize(&p.q2).into_inner();
        assert_eq!(row.id, p.id);
        assert_eq!(row.gru_score, model.score_texts(&p.q1, &p.q2).unwrap());
        assert!((row.word_match - oracle_word_match(&a, &b, &stop)).abs() < 1e-12);
        assert!((row.tfidf_match - oracle_tfidf_match(&a, &b, &idf, &stop)).abs() < 1e-12);
        assert_eq!(row.common_dups, oracle_common_dups(&edges, p.qid1, p.qid2, max_qid));
        assert_eq!(row.label, p.label);
    }
    // A question paired with itself.
    let q = &corpus.train[0].q1;
    let own = QuestionPair {
        id: 0,
        qid1: 1,
        qid2: 1,
        q1: q.clone(),
        q2: q.clone(),
        label: None,
    };
    let (wm, tf, _) = ctx.hand_features(&own);
    assert_eq!((wm, tf), (1.0, 1.0));
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()).prop_map(String::from), 0..8)
}

proptest! {
    #[test]
    fn overlap_features_are_symmetric_and_bounded(a in sentence(), b in sentence(), docs in prop::collection::vec(sentence(), 1..5)) {
        let stop = Stopwords::default();
        let idf = IdfTable::build(docs.iter().map(|d| &d[..])).unwrap();
        let wm = word_match_share(&a, &b, &stop);
        let tf = tfidf_word_match(&a, &b, &idf, &stop);
        prop_assert_eq!(wm, word_match_share(&b, &a, &stop));
        prop_assert_eq!(tf, tfidf_word_match(&b, &a, &idf, &stop));
        prop_assert!((0.0..=1.0).contains(&wm));
        prop_assert!((0.0..=1.0).contains(&tf));
    }
}
