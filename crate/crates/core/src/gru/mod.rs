//! Siamese stacked bidirectional GRU with a feed-forward scoring head.
//!
//! One parameter set encodes both questions. Each layer runs a forward and
//! a backward GRU over the padded sequence and concatenates their states per
//! step; the sentence vector is the top layer's final forward state joined
//! with its final backward state. The two sentence vectors are combined and
//! fed through ReLU layers (inverted dropout after the first) to a sigmoid
//! output.

mod adam;
mod cell;
mod model;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use cell::{gru_cell_forward, CellCache, GruCell};
pub use model::{
    bce_loss, inverted_dropout, BiGruLayer, Dense, EncodeCache, Gradients, JoinMode, Mode, ModelConfig, Network,
    PairCache, SiameseModel,
};
pub use train::{clip_global_norm, train, EncodedPair, EpochStats, TrainConfig, TrainOutcome};

use rand::Rng;

use crate::tensor::Matrix;

/// Named, shaped, read-only view of one parameter tensor.
#[derive(Debug, Clone)]
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub(crate) fn matrix(name: String, m: &'a Matrix) -> Self {
        TensorRef {
            name,
            shape: vec![m.rows(), m.cols()],
            data: m.as_slice(),
        }
    }

    pub(crate) fn vector(name: String, v: &'a [f64]) -> Self {
        TensorRef {
            name,
            shape: vec![v.len()],
            data: v,
        }
    }
}

/// Mutable view of one parameter tensor, in the same order as [`TensorRef`]s.
#[derive(Debug)]
pub struct TensorMut<'a> {
    pub data: &'a mut [f64],
}

impl<'a> TensorMut<'a> {
    pub(crate) fn new(data: &'a mut [f64]) -> Self {
        TensorMut { data }
    }
}

/// Glorot-uniform fill: U(±√(6 / (fan_in + fan_out))).
pub(crate) fn uniform_init<R: Rng>(m: &mut Matrix, fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in m.as_mut_slice() {
        *v = rng.gen_range(-limit..=limit);
    }
}
