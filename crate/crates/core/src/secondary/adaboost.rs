//! Discrete AdaBoost over decision stumps.
//!
//! Labels are mapped to ±1. Each round picks the stump with the lowest
//! weighted error ε, gives it the vote α = ½ ln((1 − ε) / ε) and reweights
//! samples by exp(−α y h(x)). Probabilities are σ(2F(x)) with F the
//! weighted vote.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::sigmoid;

use super::tree::check_rows;

/// Floor applied to ε so a perfect stump gets a large but finite vote.
const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaParams {
    pub n_rounds: usize,
}

impl Default for AdaParams {
    fn default() -> Self {
        AdaParams { n_rounds: 100 }
    }
}

/// Depth-one tree voting `left` when `x[feature] <= threshold`, else `right`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn vote(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostModel {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
}

/// What happened in one boosting round.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub stump: Stump,
    pub error: f64,
    pub alpha: f64,
    /// Normalised sample weights after the update.
    pub weights: Vec<f64>,
}

impl AdaBoostModel {
    /// `F(x) = Σ α_t h_t(x)`
    pub fn score(&self, row: &[f64]) -> f64 {
        self.stumps.iter().zip(&self.alphas).map(|(s, a)| a * s.vote(row)).sum()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(2.0 * self.score(row))
    }
}

/// Lowest weighted-error stump. Thresholds lie below the smallest value
/// (a constant vote) or midway between consecutive distinct values. Ties keep
/// the lowest feature, then threshold, then the `left = −1` orientation.
#[allow(clippy::needless_range_loop)]
fn best_stump(x: &[Vec<f64>], signs: &[f64], weights: &[f64]) -> (Stump, f64) {
    let n = x.len();
    let d = x[0].len();
    let total_pos: f64 = (0..n).filter(|&i| signs[i] > 0.0).map(|i| weights[i]).sum();
    let total: f64 = weights.iter().sum();
    let mut best: Option<(Stump, f64)> = None;
    let mut order: Vec<usize> = (0..n).collect();

    for f in 0..d {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        // weight of positives and negatives at or below the threshold
        let (mut left_pos, mut left_neg) = (0.0, 0.0);
        let mut consider = |threshold: f64, left_pos: f64, left_neg: f64| {
            // left = −1, right = +1: errors are left positives and right negatives
            let err_lr = left_pos + (total - total_pos - left_neg);
            let err_rl = total - err_lr;
            for (err, left, right) in [(err_lr, -1.0, 1.0), (err_rl, 1.0, -1.0)] {
                if best.as_ref().is_none_or(|(_, e)| err < *e) {
                    best = Some((
                        Stump {
                            feature: f,
                            threshold,
                            left,
                            right,
                        },
                        err,
                    ));
                }
            }
        };
        let lowest = x[order[0]][f];
        consider(lowest - 1.0, 0.0, 0.0);
        for k in 0..n - 1 {
            let i = order[k];
            if signs[i] > 0.0 {
                left_pos += weights[i];
            } else {
                left_neg += weights[i];
            }
            let (lo, hi) = (x[i][f], x[order[k + 1]][f]);
            if lo != hi {
                consider(lo + (hi - lo) / 2.0, left_pos, left_neg);
            }
        }
    }
    let (stump, err) = best.expect("at least one candidate");
    (stump, (err / total).max(0.0))
}

pub fn ada_fit(x: &[Vec<f64>], y: &[u8], params: &AdaParams) -> Result<AdaBoostModel> {
    ada_fit_traced(x, y, params).map(|(model, _)| model)
}

/// Like [`ada_fit`], also returning the per-round trace.
pub fn ada_fit_traced(x: &[Vec<f64>], y: &[u8], params: &AdaParams) -> Result<(AdaBoostModel, Vec<Round>)> {
    check_rows(x, y)?;
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::Data("AdaBoost needs both classes in the training rows".into()));
    }
    let n = x.len();
    let signs: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut weights = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        stumps: Vec::new(),
        alphas: Vec::new(),
    };
    let mut trace = Vec::new();

    for _ in 0..params.n_rounds {
        let (stump, error) = best_stump(x, &signs, &weights);
        if error >= 0.5 {
            break;
        }
        let clipped = error.max(MIN_ERROR);
        let alpha = 0.5 * ((1.0 - clipped) / clipped).ln();
        for i in 0..n {
            weights[i] *= (-alpha * signs[i] * stump.vote(&x[i])).exp();
        }
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= z);
        model.stumps.push(stump);
        model.alphas.push(alpha);
        trace.push(Round {
            stump,
            error,
            alpha,
            weights: weights.clone(),
        });
        if error == 0.0 {
            break;
        }
    }
    Ok((model, trace))
}

pub fn ada_predict(model: &AdaBoostModel, row: &[f64]) -> f64 {
    model.predict_proba(row)
}
