//! Vocabulary and the word-embedding matrix initialised from GloVe vectors.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id mapping. Ids 0 and 1 are reserved for PAD and UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, u32>,
    id_to_word: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            word_to_id: HashMap::new(),
            id_to_word: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
        }
    }
}

impl Vocabulary {
    /// Builds a vocabulary with ids assigned in iteration order starting at 2.
    /// Repeated words keep their first id.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::default();
        for w in words {
            vocab.insert(w.into());
        }
        vocab
    }

    fn insert(&mut self, word: String) -> u32 {
        match word.as_str() {
            PAD_TOKEN => return PAD_ID,
            UNK_TOKEN => return UNK_ID,
            _ => {}
        }
        if let Some(&id) = self.word_to_id.get(&word) {
            return id;
        }
        let id = self.id_to_word.len() as u32;
        self.word_to_id.insert(word.clone(), id);
        self.id_to_word.push(word);
        id
    }

    /// `n_w`, counting PAD and UNK.
    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_to_id.is_empty()
    }

    /// Id of a corpus word; `None` for unknown words and the reserved tokens.
    pub fn id(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    pub fn id_or_unk(&self, word: &str) -> u32 {
        self.id(word).unwrap_or(UNK_ID)
    }

    pub fn ids_of(&self, words: &[String]) -> Vec<u32> {
        words.iter().map(|w| self.id_or_unk(w)).collect()
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.id_to_word.get(id as usize).map(String::as_str)
    }

    /// Words in id order, PAD and UNK included.
    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }

    /// Rebuilds a vocabulary from the full id-ordered word list.
    pub fn from_id_order(words: Vec<String>) -> Result<Self> {
        if words.len() < 2 || words[0] != PAD_TOKEN || words[1] != UNK_TOKEN {
            return Err(Error::Checkpoint(
                "vocabulary must start with the PAD and UNK tokens".into(),
            ));
        }
        let mut vocab = Vocabulary::default();
        for w in words.into_iter().skip(2) {
            let expected = vocab.len() as u32;
            if vocab.insert(w.clone()) != expected {
                return Err(Error::Checkpoint(format!("duplicate vocabulary entry {w:?}")));
            }
        }
        Ok(vocab)
    }
}

/// Vocabulary plus the `n_w × d_w` embedding matrix.
///
/// Row 0 (PAD) is all zeros and never trained. The remaining rows are
/// trainable unless the store was frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub vocab: Vocabulary,
    pub matrix: Matrix,
    trainable: Vec<bool>,
}

impl EmbeddingStore {
    pub fn new(vocab: Vocabulary, matrix: Matrix) -> Result<Self> {
        if matrix.rows() != vocab.len() {
            return Err(Error::Data(format!(
                "embedding matrix has {} rows for a vocabulary of {}",
                matrix.rows(),
                vocab.len()
            )));
        }
        if matrix.row(PAD_ID as usize).iter().any(|&v| v != 0.0) {
            return Err(Error::Data("PAD embedding row must be zero".into()));
        }
        if let Some(bad) = matrix.as_slice().iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding value {bad}")));
        }
        let mut trainable = vec![true; vocab.len()];
        trainable[PAD_ID as usize] = false;
        Ok(EmbeddingStore {
            vocab,
            matrix,
            trainable,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn n_words(&self) -> usize {
        self.matrix.rows()
    }

    pub fn freeze_all(&mut self) {
        self.trainable.iter_mut().for_each(|t| *t = false);
    }

    pub fn is_trainable(&self, id: u32) -> bool {
        self.trainable[id as usize]
    }

    pub fn trainable_mask(&self) -> &[bool] {
        &self.trainable
    }

    pub fn row(&self, id: u32) -> Result<&[f64]> {
        if id as usize >= self.n_words() {
            return Err(Error::IdOutOfRange {
                id: id as usize,
                n_words: self.n_words(),
            });
        }
        Ok(self.matrix.row(id as usize))
    }

    pub fn lookup(&self, ids: &[u32]) -> Result<Vec<&[f64]>> {
        ids.iter().map(|&id| self.row(id)).collect()
    }
}

/// Reads a GloVe text file, keeping only the vectors of `corpus_vocab` words.
///
/// Every line is validated. The resulting vocabulary lists the kept words in
/// file order after PAD and UNK; UNK is initialised to the mean of the kept
/// vectors (zeros when none were kept).
pub fn load_glove(
    path: impl AsRef<Path>,
    expected_dim: usize,
    corpus_vocab: &HashSet<String>,
) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_glove(BufReader::new(file), path, expected_dim, corpus_vocab)
}

pub fn read_glove<R: BufRead>(
    reader: R,
    path: &Path,
    expected_dim: usize,
    corpus_vocab: &HashSet<String>,
) -> Result<EmbeddingStore> {
    if expected_dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut vocab = Vocabulary::default();
    let mut rows: Vec<f64> = vec![0.0; 2 * expected_dim];

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let Some(token) = fields.next() else {
            continue;
        };
        let values = fields
            .map(|f| {
                f.trim_end().parse::<f64>().map_err(|_| Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: format!("cannot parse {f:?} as a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("token {token:?} has no vector"),
            });
        }
        if values.len() != expected_dim {
            return Err(Error::DimensionMismatch {
                path: path.to_path_buf(),
                token: token.to_string(),
                expected: expected_dim,
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::MalformedLine {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("non-finite component {bad}"),
            });
        }
        if corpus_vocab.contains(token) && vocab.id(token).is_none() {
            vocab.insert(token.to_string());
            rows.extend_from_slice(&values);
        }
    }

    let n_words = vocab.len();
    let mut matrix = Matrix::from_vec(n_words, expected_dim, rows);
    let loaded = n_words - 2;
    if loaded > 0 {
        let mut mean = vec![0.0; expected_dim];
        for r in 2..n_words {
            for (m, v) in mean.iter_mut().zip(matrix.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= loaded as f64);
        matrix.row_mut(UNK_ID as usize).copy_from_slice(&mean);
    }
    EmbeddingStore::new(vocab, matrix)
}
