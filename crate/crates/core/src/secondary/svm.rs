//! Linear SVM trained by Pegasos-style stochastic subgradient descent on the
//! primal hinge loss, with Platt scaling for probabilities.
//!
//! Features are z-scored with training statistics. The bias is learned as the
//! weight of a constant feature. A random 20% of the rows is held out to fit
//! the Platt sigmoid.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{dot, sigmoid};

use super::tree::check_rows;

const PLATT_TOLERANCE: f64 = 1e-8;
const PLATT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub calibration_fraction: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
            calibration_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// Weights in standardised feature space.
    pub w: Vec<f64>,
    pub b: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub platt_a: f64,
    pub platt_b: f64,
}

impl SvmModel {
    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Signed distance score `w·z(x) + b`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        dot(&self.w, &self.standardize(row)) + self.b
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.platt_a * self.margin(row) + self.platt_b)
    }

    pub fn weight_norm(&self) -> f64 {
        dot(&self.w, &self.w).sqrt()
    }
}

fn column_stats(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..d)
        .map(|j| {
            let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Pegasos over `(z, ±1)` samples with a constant bias feature appended.
/// Returns the augmented weight vector.
fn pegasos(z: &[Vec<f64>], signs: &[f64], lambda: f64, epochs: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = z[0].len() + 1;
    let mut w = vec![0.0; d];
    let radius = 1.0 / lambda.sqrt();
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let xi = &z[i];
            let margin = signs[i] * (dot(&w[..d - 1], xi) + w[d - 1]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                let step = eta * signs[i];
                for (wj, xj) in w.iter_mut().zip(xi) {
                    *wj += step * xj;
                }
                w[d - 1] += step;
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    w
}

/// Platt's method: fit `σ(a·m + b)` to smoothed targets by Newton's method
/// with backtracking. Returns `None` when the calibration rows are one class.
pub fn platt_fit(margins: &[f64], labels: &[u8]) -> Option<(f64, f64)> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let hi = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let lo = 1.0 / (n_neg as f64 + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| {
        margins
            .iter()
            .zip(&targets)
            .map(|(&m, &t)| {
                let s = a * m + b;
                // t·ln(1 + e^{−s}) + (1 − t)·ln(1 + e^{s})
                let softplus = |v: f64| {
                    if v > 0.0 {
                        v + (-v).exp().ln_1p()
                    } else {
                        v.exp().ln_1p()
                    }
                };
                t * softplus(-s) + (1.0 - t) * softplus(s)
            })
            .sum::<f64>()
    };

    let mut a = 0.0;
    let mut b = ((n_pos as f64 + 1.0) / (n_neg as f64 + 1.0)).ln();
    let mut f = objective(a, b);
    for _ in 0..PLATT_MAX_ITER {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 1e-12, 0.0, 1e-12);
        for (&m, &t) in margins.iter().zip(&targets) {
            let p = sigmoid(a * m + b);
            let d = p - t;
            ga += d * m;
            gb += d;
            let w = p * (1.0 - p);
            haa += w * m * m;
            hab += w * m;
            hbb += w;
        }
        if ga.abs() < PLATT_TOLERANCE && gb.abs() < PLATT_TOLERANCE {
            break;
        }
        let det = haa * hbb - hab * hab;
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(-hab * ga + haa * gb) / det;
        let slope = ga * da + gb * db;
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < f + 1e-4 * step * slope {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step /= 2.0;
            if step < 1e-10 {
                return Some((a, b));
            }
        }
    }
    Some((a, b))
}

pub fn svm_fit(x: &[Vec<f64>], y: &[u8], params: &SvmParams) -> Result<SvmModel> {
    check_rows(x, y)?;
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::Data("SVM needs both classes in the training rows".into()));
    }
    if params.lambda.is_nan() || params.lambda <= 0.0 {
        return Err(Error::Config("SVM lambda must be positive".into()));
    }
    if !(0.0..1.0).contains(&params.calibration_fraction) {
        return Err(Error::Config("calibration_fraction must be in [0, 1)".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut rng);
    let n_cal = ((x.len() as f64) * params.calibration_fraction).floor() as usize;
    let (cal_idx, fit_idx) = order.split_at(n_cal.min(x.len() - 1));

    let fit_x: Vec<Vec<f64>> = fit_idx.iter().map(|&i| x[i].clone()).collect();
    let fit_y: Vec<u8> = fit_idx.iter().map(|&i| y[i]).collect();
    let (mean, std) = column_stats(&fit_x);
    let mut model = SvmModel {
        w: vec![0.0; mean.len()],
        b: 0.0,
        mean,
        std,
        platt_a: 1.0,
        platt_b: 0.0,
    };
    let z: Vec<Vec<f64>> = fit_x.iter().map(|r| model.standardize(r)).collect();
    let signs: Vec<f64> = fit_y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let w = pegasos(&z, &signs, params.lambda, params.epochs, &mut rng);
    let d = w.len() - 1;
    model.w = w[..d].to_vec();
    model.b = w[d];

    let margins: Vec<f64> = cal_idx.iter().map(|&i| model.margin(&x[i])).collect();
    let labels: Vec<u8> = cal_idx.iter().map(|&i| y[i]).collect();
    match platt_fit(&margins, &labels) {
        Some((a, b)) => {
            model.platt_a = a;
            model.platt_b = b;
        }
        None => log::warn!("calibration split holds a single class; using the uncalibrated sigmoid"),
    }
    Ok(model)
}

pub fn svm_predict(model: &SvmModel, row: &[f64]) -> f64 {
    model.predict_proba(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncalibrated_zero_margin_is_one_half() {
        let model = SvmModel {
            w: vec![1.0, -1.0],
            b: 0.0,
            mean: vec![0.0, 0.0],
            std: vec![1.0, 1.0],
            platt_a: 1.0,
            platt_b: 0.0,
        };
        assert_eq!(model.margin(&[2.0, 2.0]), 0.0);
        assert_eq!(svm_predict(&model, &[2.0, 2.0]), 0.5);
    }

    #[test]
    fn platt_needs_both_classes() {
        assert_eq!(platt_fit(&[0.5, 1.0], &[1, 1]), None);
    }

    #[test]
    fn platt_gradient_vanishes_at_the_solution() {
        let margins = [-2.0, -1.0, -0.5, 0.2, 0.4, 1.5, 2.5, -0.1];
        let labels = [0, 0, 1, 0, 1, 1, 1, 0];
        let (a, b) = platt_fit(&margins, &labels).unwrap();
        let n_pos = 4.0;
        let n_neg = 4.0;
        let (mut ga, mut gb) = (0.0, 0.0);
        for (&m, &l) in margins.iter().zip(&labels) {
            let t = if l == 1 {
                (n_pos + 1.0) / (n_pos + 2.0)
            } else {
                1.0 / (n_neg + 2.0)
            };
            let p = sigmoid(a * m + b);
            ga += (p - t) * m;
            gb += p - t;
        }
        assert!(ga.abs() < 1e-8 && gb.abs() < 1e-8);
        assert!(a > 0.0);
    }

    #[test]
    fn single_class_calibration_falls_back() {
        // One positive in ten rows: the two calibration rows usually miss it.
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..10).map(|i| u8::from(i >= 9)).collect();
        let mut fallbacks = 0;
        for seed in 0..20 {
            let params = SvmParams {
                seed,
                ..SvmParams::default()
            };
            let model = svm_fit(&x, &y, &params).unwrap();
            let mut order: Vec<usize> = (0..10).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let single_class = order[..2].iter().all(|&i| y[i] == 0);
            let uncalibrated = model.platt_a == 1.0 && model.platt_b == 0.0;
            assert_eq!(single_class, uncalibrated, "seed {seed}");
            if uncalibrated {
                fallbacks += 1;
                let m = model.margin(&[3.0]);
                assert_eq!(model.predict_proba(&[3.0]), sigmoid(m));
            }
        }
        assert!(fallbacks > 0);
    }
}
