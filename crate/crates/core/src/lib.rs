//! Duplicate-question detection.
//!
//! A Siamese stacked bidirectional GRU scores each question pair; the score
//! is joined with three engineered features (word overlap, IDF-weighted
//! overlap and the number of shared known duplicates) and passed to a
//! secondary classifier (random forest, AdaBoost or a linear SVM).
//!
//! Module map:
//!
//! * [`text_prep`]: tokenization, padding and length statistics
//! * [`embedding`]: vocabulary and GloVe-initialised embeddings
//! * [`dataset`]: question-pair CSV files
//! * [`augment`]: flipped pairs, self pairs, balanced negatives
//! * [`gru`]: the neural model, its gradients and the trainer
//! * [`features`]: engineered features and the duplicate graph
//! * [`secondary`]: tree ensembles, boosting, SVM and log loss
//! * [`pipeline`]: configuration, checkpoints, stage orchestration and CLI
//! * [`synth`]: synthetic corpora for tests and examples

pub mod augment;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod features;
pub mod gru;
pub mod pipeline;
pub mod secondary;
pub mod synth;
pub mod tensor;
pub mod text_prep;

pub use error::{Error, Result};
