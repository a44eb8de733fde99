//! Tokenization, fixed-length id encoding and sentence-length statistics.
//!
//! The tokenizer is a small deterministic rule set:
//!
//! 1. lowercase the whole input;
//! 2. split on Unicode whitespace;
//! 3. peel leading and trailing ASCII punctuation off every chunk, one token
//!    per punctuation character.
//!
//! Punctuation inside a chunk stays attached, so `don't` and `e-mail` are
//! single tokens.

use std::collections::BTreeMap;
use std::ops::Deref;

use crate::embedding::{Vocabulary, PAD_ID, UNK_ID};
use crate::error::{Error, Result};

/// Default padded sentence length.
pub const DEFAULT_MAX_LEN: usize = 40;

/// Ordered list of lowercase, whitespace-free, nonempty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().map(Into::into).collect())
    }
}

/// Fixed-length sequence of vocabulary ids with a contiguous PAD prefix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdSeq(Vec<u32>);

impl IdSeq {
    /// Wraps raw ids without checking them against a vocabulary.
    pub fn from_raw(ids: Vec<u32>) -> Self {
        IdSeq(ids)
    }

    pub fn pad_count(&self) -> usize {
        self.0.iter().take_while(|&&id| id == PAD_ID).count()
    }
}

impl Deref for IdSeq {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lowered.split_whitespace() {
        let core_start = chunk
            .char_indices()
            .find(|(_, c)| !c.is_ascii_punctuation())
            .map(|(i, _)| i)
            .unwrap_or(chunk.len());
        let core_end = chunk
            .char_indices()
            .rev()
            .find(|(_, c)| !c.is_ascii_punctuation())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(core_start)
            .max(core_start);

        tokens.extend(chunk[..core_start].chars().map(String::from));
        if core_end > core_start {
            tokens.push(chunk[core_start..core_end].to_string());
        }
        tokens.extend(chunk[core_end..].chars().map(String::from));
    }
    TokenSeq(tokens)
}

/// Maps tokens to ids and pads or truncates to exactly `max_len`.
///
/// Short sequences are padded at the front; long ones keep their first
/// `max_len` tokens. Unknown tokens become UNK.
pub fn encode(tokens: &[String], vocab: &Vocabulary, max_len: usize) -> Result<IdSeq> {
    if max_len == 0 {
        return Err(Error::Config("sequence length must be at least 1".into()));
    }
    Ok(encode_ids(&vocab.ids_of(tokens), max_len))
}

/// Pads or truncates already-mapped ids. `max_len` must be positive.
pub fn encode_ids(ids: &[u32], max_len: usize) -> IdSeq {
    debug_assert!(max_len > 0);
    let kept = &ids[..ids.len().min(max_len)];
    let mut out = vec![PAD_ID; max_len - kept.len()];
    out.extend_from_slice(kept);
    IdSeq(out)
}

/// Inverse of [`encode`] up to truncation: PAD positions are dropped and
/// out-of-vocabulary tokens come back as the UNK surface form.
pub fn decode(ids: &IdSeq, vocab: &Vocabulary) -> Vec<String> {
    ids.iter()
        .skip_while(|&&id| id == PAD_ID)
        .map(|&id| {
            vocab
                .word(id)
                .unwrap_or_else(|| vocab.word(UNK_ID).expect("UNK is always present"))
                .to_string()
        })
        .collect()
}

pub type LengthHistogram = BTreeMap<usize, usize>;

pub fn length_histogram<'a, I>(corpus: I) -> LengthHistogram
where
    I: IntoIterator<Item = &'a [String]>,
{
    let mut hist = LengthHistogram::new();
    for seq in corpus {
        *hist.entry(seq.len()).or_default() += 1;
    }
    hist
}

/// Combines per-partition histograms.
pub fn merge_histograms(parts: impl IntoIterator<Item = LengthHistogram>) -> LengthHistogram {
    let mut total = LengthHistogram::new();
    for part in parts {
        for (len, count) in part {
            *total.entry(len).or_default() += count;
        }
    }
    total
}

/// Two-column `length count` table, ascending by length.
pub fn format_histogram(hist: &LengthHistogram) -> String {
    let mut out = String::from("length\tcount\n");
    for (len, count) in hist {
        out.push_str(&format!("{len}\t{count}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(&*tokenize("What is REST?"), toks(&["what", "is", "rest", "?"]));
        assert!(tokenize("").is_empty());
        assert_eq!(&*tokenize("Hello"), toks(&["hello"]));
    }

    #[test]
    fn keeps_internal_apostrophes_and_hyphens() {
        assert_eq!(
            &*tokenize("Don't send an E-mail, ok?!"),
            toks(&["don't", "send", "an", "e-mail", ",", "ok", "?", "!"])
        );
        assert_eq!(&*tokenize("(\"quoted\")"), toks(&["(", "\"", "quoted", "\"", ")"]));
        assert_eq!(&*tokenize("..."), toks(&[".", ".", "."]));
        assert_eq!(&*tokenize("  \t\n "), toks(&[]));
    }

    #[test]
    fn encode_examples() {
        let vocab = Vocabulary::from_words(["a", "b"]);
        assert_eq!(&*encode(&toks(&["a", "b"]), &vocab, 4).unwrap(), &[0, 0, 2, 3]);
        assert_eq!(&*encode(&toks(&["zzz-not-in-vocab"]), &vocab, 2).unwrap(), &[0, 1]);

        let forty: Vec<String> = (0..40)
            .map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string())
            .collect();
        let ids = encode(&forty, &vocab, 40).unwrap();
        assert_eq!(ids.pad_count(), 0);
        assert!(ids
            .iter()
            .zip(&forty)
            .all(|(&id, w)| vocab.word(id) == Some(w.as_str())));
    }

    #[test]
    fn encode_truncates_keeping_the_head() {
        let vocab = Vocabulary::from_words(["a", "b", "c"]);
        assert_eq!(&*encode(&toks(&["c", "b", "a"]), &vocab, 2).unwrap(), &[4, 3]);
    }

    #[test]
    fn zero_length_is_a_config_error() {
        let vocab = Vocabulary::from_words(["a"]);
        assert!(matches!(encode(&toks(&["a"]), &vocab, 0), Err(Error::Config(_))));
    }

    #[test]
    fn histogram_examples() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(length_histogram(empty.iter().map(|s| s.as_slice())).is_empty());

        let corpus = [toks(&["a"]), toks(&["a", "b"]), toks(&["c"])];
        let hist = length_histogram(corpus.iter().map(|s| s.as_slice()));
        assert_eq!(hist, LengthHistogram::from([(1, 2), (2, 1)]));
        assert_eq!(format_histogram(&hist), "length\tcount\n1\t2\n2\t1\n");
    }

    #[test]
    fn merged_partitions_match_single_pass() {
        let corpus: Vec<Vec<String>> = (0..30).map(|i| vec!["x".to_string(); i % 7]).collect();
        let whole = length_histogram(corpus.iter().map(|s| s.as_slice()));
        let parts = corpus
            .chunks(4)
            .map(|c| length_histogram(c.iter().map(|s| s.as_slice())));
        assert_eq!(merge_histograms(parts), whole);
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_nonempty_and_whitespace_free(s in "\\PC{0,60}") {
            for tok in tokenize(&s).iter() {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(char::is_whitespace));
                prop_assert_eq!(&tok.to_lowercase(), tok);
            }
        }

        #[test]
        fn tokenize_is_idempotent(s in "[a-zA-Z0-9 ,.?!'()\\-]{0,80}") {
            let once = tokenize(&s);
            prop_assert_eq!(tokenize(&once.join()), once);
        }

        #[test]
        fn encode_is_total_with_exact_length(
            words in proptest::collection::vec("[a-e]{1,2}", 0..20),
            max_len in 1usize..25,
        ) {
            let vocab = Vocabulary::from_words(["a", "b", "c", "aa", "bb"]);
            let ids = encode(&words, &vocab, max_len).unwrap();
            prop_assert_eq!(ids.len(), max_len);
            prop_assert_eq!(ids.pad_count(), max_len.saturating_sub(words.len()));
            prop_assert!(ids.iter().all(|&id| (id as usize) < vocab.len()));
            prop_assert!(ids[ids.pad_count()..].iter().all(|&id| id != PAD_ID));

            let restored = decode(&ids, &vocab);
            let expected: Vec<String> = words
                .iter()
                .take(max_len)
                .map(|w| if vocab.id(w).is_some() { w.clone() } else { crate::embedding::UNK_TOKEN.to_string() })
                .collect();
            prop_assert_eq!(restored, expected);
        }
    }
}
