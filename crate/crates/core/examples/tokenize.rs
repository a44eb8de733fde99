//! Tokenizes a few questions, builds a vocabulary and shows the padded id
//! sequences the encoder consumes.
//!
//! ```text
//! cargo run --example tokenize
//! ```

use quesim::embedding::Vocabulary;
use quesim::text_prep::{decode, encode, format_histogram, length_histogram, tokenize};

fn main() -> quesim::Result<()> {
    let questions = [
        "How do I learn Rust quickly?",
        "What's the fastest way to learn Rust?",
        "Why is the sky blue...",
    ];
    let tokens: Vec<_> = questions.iter().map(|q| tokenize(q)).collect();
    // Leave one word out so it maps to UNK.
    let vocab = Vocabulary::from_words(tokens.iter().flat_map(|t| t.iter().cloned()).filter(|w| w != "sky"));

    for (q, t) in questions.iter().zip(&tokens) {
        let ids = encode(t, &vocab, 8)?;
        println!("{q:?}");
        println!("  tokens  {:?}", &t[..]);
        println!("  ids     {:?}", &ids[..]);
        println!("  decoded {:?}", decode(&ids, &vocab));
    }

    // Long questions keep their head.
    let long = tokenize("one two three four five six seven eight nine ten");
    let ids = encode(&long, &Vocabulary::from_words(long.iter().cloned()), 4)?;
    println!("truncated to 4: {:?}", &ids[..]);

    let hist = length_histogram(tokens.iter().map(|t| &t[..]));
    print!("{}", format_histogram(&hist));
    Ok(())
}
