use crate::error::{Error, Result};

const CLIP: f64 = 1e-15;

/// Mean binary cross-entropy with probabilities clipped to `[1e-15, 1 − 1e-15]`.
pub fn log_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Data("log loss of an empty set".into()));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(CLIP, 1.0 - CLIP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Fraction of predictions on the correct side of 0.5.
pub fn accuracy(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Data(
            "accuracy needs equal, nonzero numbers of predictions and labels".into(),
        ));
    }
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= 0.5) == (y == 1))
        .count();
    Ok(correct as f64 / probs.len() as f64)
}
