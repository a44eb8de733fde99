//! Mini-batch training loop with a seeded dev split and best-dev selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text_prep::IdSeq;

use super::adam::{AdamConfig, AdamState};
use super::model::{bce_loss, mean_eval_loss, Gradients, Mode, SiameseModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr: f64,
    pub keep_prob: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub dev_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 10,
            seed: 0,
            lr: 1e-3,
            keep_prob: 0.8,
            clip_norm: Some(5.0),
            dev_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::Config(format!("keep_prob {} must be in (0, 1]", self.keep_prob)));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(Error::Config(format!(
                "dev_fraction {} must be in [0, 1)",
                self.dev_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub ids1: IdSeq,
    pub ids2: IdSeq,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches (train mode).
    pub train_loss: f64,
    /// Mean evaluation-mode loss on the dev split, if there is one.
    pub dev_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best model by dev loss, or the final one without a dev split.
    pub model: SiameseModel,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Scales every gradient so the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.data.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Trains `model` on `data`, which is split into train and dev parts by a
/// seeded shuffle. The whole run is deterministic given `cfg.seed`.
pub fn train(mut model: SiameseModel, data: &[EncodedPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    if let Some(p) = data.iter().find(|p| p.label > 1) {
        return Err(Error::Data(format!("label {} is not 0 or 1", p.label)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_dev = ((data.len() as f64) * cfg.dev_fraction).floor() as usize;
    let n_dev = n_dev.min(data.len() - 1);
    let (dev_idx, train_idx) = order.split_at(n_dev);
    let dev_idx = dev_idx.to_vec();
    let mut train_idx = train_idx.to_vec();

    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.data.len()).collect();
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        sizes,
    );
    let mut grads = model.zero_gradients();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, SiameseModel)> = None;
    let mut batch_counter = 0usize;

    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(cfg.batch_size) {
            grads.zero();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let pair = &data[i];
                let cache = model.forward_pair(
                    &pair.ids1,
                    &pair.ids2,
                    Mode::Train {
                        keep_prob: cfg.keep_prob,
                        rng: &mut rng,
                    },
                )?;
                let loss = bce_loss(cache.y_hat, pair.label);
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!("loss in batch {batch_counter}")));
                }
                loss_sum += loss;
                model.accumulate_gradients(&cache, pair.label, scale, &mut grads);
            }
            if let Some(max_norm) = cfg.clip_norm {
                let norm = clip_global_norm(&mut grads, max_norm);
                if !norm.is_finite() {
                    return Err(Error::NonFinite(format!("gradient norm in batch {batch_counter}")));
                }
            }
            adam.step(model.tensors_mut(), grads.tensors());
            batch_counter += 1;
        }
        let train_loss = loss_sum / train_idx.len() as f64;

        let dev_loss = if dev_idx.is_empty() {
            None
        } else {
            Some(mean_eval_loss(
                &model,
                dev_idx
                    .iter()
                    .map(|&i| (&data[i].ids1[..], &data[i].ids2[..], data[i].label)),
            )?)
        };
        log::info!(
            "epoch {}: train loss {:.6}{}",
            epoch + 1,
            train_loss,
            dev_loss.map(|d| format!(", dev loss {d:.6}")).unwrap_or_default()
        );
        history.push(EpochStats {
            epoch: epoch + 1,
            train_loss,
            dev_loss,
        });
        if let Some(d) = dev_loss {
            if best.as_ref().is_none_or(|(b, _, _)| d < *b) {
                best = Some((d, epoch + 1, model.clone()));
            }
        }
    }

    Ok(match best {
        Some((_, best_epoch, model)) => TrainOutcome {
            model,
            history,
            best_epoch,
        },
        None => TrainOutcome {
            best_epoch: cfg.epochs,
            model,
            history,
        },
    })
}
