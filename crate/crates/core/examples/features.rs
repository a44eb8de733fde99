//! Computes the three engineered features for a handful of pairs.
//!
//! ```text
//! cargo run --example features
//! ```

use quesim::dataset::QuestionPair;
use quesim::features::{FeatureContext, Stopwords};

fn main() -> quesim::Result<()> {
    let train = vec![
        QuestionPair::labeled(
            0,
            1,
            2,
            "How do I learn Rust?",
            "What is the best way to learn Rust?",
            1,
        ),
        QuestionPair::labeled(
            1,
            2,
            3,
            "What is the best way to learn Rust?",
            "How can I get started with Rust?",
            1,
        ),
        QuestionPair::labeled(2, 1, 4, "How do I learn Rust?", "How do I learn Go?", 0),
        QuestionPair::labeled(3, 5, 6, "Why is the sky blue?", "What makes the sky blue?", 1),
    ];
    let ctx = FeatureContext::from_training(&train, Stopwords::default())?;

    let probes = [
        QuestionPair::labeled(10, 1, 3, "How do I learn Rust?", "How can I get started with Rust?", 1),
        QuestionPair::labeled(11, 4, 6, "How do I learn Go?", "What makes the sky blue?", 0),
        QuestionPair::labeled(12, 1, 1, "How do I learn Rust?", "How do I learn Rust?", 1),
    ];
    println!("{:>10} {:>10} {:>11}  pair", "word", "tfidf", "common dups");
    for p in &probes {
        let (word, tfidf, dups) = ctx.hand_features(p);
        println!("{word:>10.3} {tfidf:>10.3} {dups:>11}  {:?} / {:?}", p.q1, p.q2);
    }
    // Questions 1 and 3 are never paired, but both are duplicates of 2.
    println!("neighbours of question 2: {:?}", ctx.graph.neighbors(2));
    Ok(())
}
