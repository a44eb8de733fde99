//! Loads GloVe-format vectors restricted to a corpus vocabulary.
//!
//! ```text
//! cargo run --example load_glove -- [glove.txt dim]
//! ```
//!
//! Without arguments a small inline file is used.

use std::collections::HashSet;
use std::path::Path;

use quesim::embedding::{load_glove, read_glove, PAD_ID, UNK_ID};

const INLINE: &str = "\
rust 0.5 0.1 -0.2
learn 0.3 0.4 0.0
the 0.01 0.02 0.03
quickly -0.1 0.9 0.2
";

fn main() -> quesim::Result<()> {
    let corpus: HashSet<String> = ["how", "do", "i", "learn", "rust", "quickly"]
        .into_iter()
        .map(String::from)
        .collect();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let store = match args.as_slice() {
        [path, dim] => load_glove(path, dim.parse().expect("dim must be an integer"), &corpus)?,
        _ => read_glove(INLINE.as_bytes(), Path::new("inline"), 3, &corpus)?,
    };

    println!("{} rows of dimension {}", store.n_words(), store.dim());
    println!("PAD {:?}", store.row(PAD_ID)?);
    println!("UNK {:?} (mean of loaded rows)", store.row(UNK_ID)?);
    for w in store.vocab.words().iter().skip(2) {
        println!("{w:>8} {:?}", store.row(store.vocab.id(w).unwrap())?);
    }
    let missing: Vec<_> = corpus.iter().filter(|w| store.vocab.id(w).is_none()).collect();
    println!("no vector, mapped to UNK: {missing:?}");
    Ok(())
}
