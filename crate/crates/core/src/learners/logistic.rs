//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Cap the step at 1/L, where L bounds the loss curvature, so the loss
    /// decreases monotonically even with many features.
    pub cap_step: bool,
    /// Weights start at zero; the seed is kept for interface symmetry.
    pub seed: u64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 0.5,
            epochs: 300,
            cap_step: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// Row-major `n_classes × n_features`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    n_classes: usize,
    n_features: usize,
    /// Mean cross-entropy before training and after every epoch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    loss_history: Vec<f64>,
}

pub fn fit_logistic(x: &Matrix, y: &[usize], n_classes: usize, params: &LogisticParams) -> Result<LogisticModel> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput("cannot fit logistic regression on zero rows".into()));
    }
    if y.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::UnknownLabel(bad.to_string()));
    }
    let mut model = LogisticModel::zeros(n_classes, x.n_cols());
    let mut step = params.learning_rate;
    if params.cap_step {
        // Hessian ⪯ ½·mean‖[x, 1]‖²·I, so 1/L with L = ½·mean‖[x, 1]‖² guarantees descent.
        let mean_sq = x.rows().map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / x.n_rows() as f64;
        step = step.min(2.0 / mean_sq);
    }

    let (mut loss, mut grad) = model.loss_and_gradient(x, y);
    let mut history = Vec::with_capacity(params.epochs + 1);
    history.push(loss);
    for _ in 0..params.epochs {
        for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
            *w -= step * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= step * g;
        }
        (loss, grad) = model.loss_and_gradient(x, y);
        if !loss.is_finite() || !model.weights.iter().chain(&model.bias).all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                learning_rate: params.learning_rate,
            });
        }
        history.push(loss);
    }
    model.loss_history = history;
    Ok(model)
}

impl LogisticModel {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
            n_classes,
            n_features,
            loss_history: Vec::new(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    fn logits(&self, row: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let w = &self.weights[c * self.n_features..(c + 1) * self.n_features];
                self.bias[c] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.logits(row))
    }

    /// Mean cross-entropy and its gradient (returned in model shape).
    pub fn loss_and_gradient(&self, x: &Matrix, y: &[usize]) -> (f64, LogisticModel) {
        let mut grad = LogisticModel::zeros(self.n_classes, self.n_features);
        let n = x.n_rows() as f64;
        let mut loss = 0.0;
        for (row, &label) in x.rows().zip(y) {
            let logits = self.logits(row);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            loss += lse - logits[label];
            let p = softmax(&logits);
            for c in 0..self.n_classes {
                let d = (p[c] - f64::from(u8::from(c == label))) / n;
                grad.bias[c] += d;
                for (g, v) in grad.weights[c * self.n_features..(c + 1) * self.n_features].iter_mut().zip(row) {
                    *g += d * v;
                }
            }
        }
        (loss / n, grad)
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn zero_rate_gives_uniform_model() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let params = LogisticParams {
            learning_rate: 0.0,
            epochs: 1,
            ..LogisticParams::default()
        };
        let m = fit_logistic(&x, &[0, 2], 3, &params).unwrap();
        assert!(m.weights().iter().all(|&w| w == 0.0));
        for p in m.proba_row(&[0.3, 0.9]) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn separable_two_class_reaches_full_accuracy() {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [f64::from(i) / 40.0, f64::from(i % 3) / 3.0]).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[0] >= 0.5)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let params = LogisticParams {
            epochs: 5000,
            ..LogisticParams::default()
        };
        let m = fit_logistic(&x, &y, 2, &params).unwrap();
        for (r, &l) in rows.iter().zip(&y) {
            assert_eq!(super::super::argmax(&m.proba_row(r)), l);
        }
    }

    #[test]
    fn loss_is_monotone_with_many_features() {
        let mut rng = seed::rng(11, "test", &[]);
        let rows: Vec<Vec<f64>> = (0..150).map(|_| (0..60).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).collect();
        let y: Vec<usize> = (0..150).map(|_| rng.gen_range(0..4)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = fit_logistic(&x, &y, 4, &LogisticParams::default()).unwrap();
        let h = m.loss_history();
        assert_eq!(h.len(), 301);
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{} -> {}", w[0], w[1]);
        }
        assert!(h[300] < h[0]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seed::rng(3, "test", &[]);
        for _ in 0..10 {
            let (n, m, k) = (rng.gen_range(2..12), rng.gen_range(1..5), rng.gen_range(2..5));
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.gen::<f64>()).collect()).collect();
            let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let mut model = LogisticModel::zeros(k, m);
            model.weights_mut().iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
            model.bias_mut().iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
            let (_, grad) = model.loss_and_gradient(&x, &y);
            let h = 1e-5;
            for idx in 0..model.weights().len() {
                let mut plus = model.clone();
                plus.weights_mut()[idx] += h;
                let mut minus = model.clone();
                minus.weights_mut()[idx] -= h;
                let fd = (plus.loss_and_gradient(&x, &y).0 - minus.loss_and_gradient(&x, &y).0) / (2.0 * h);
                let an = grad.weights()[idx];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-4 || (fd - an).abs() < 1e-10, "fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let params = LogisticParams {
            learning_rate: 1e308,
            epochs: 50,
            cap_step: false,
            seed: 0,
        };
        let err = fit_logistic(&x, &[0, 1, 1], 2, &params).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        assert!(err.to_string().contains("1e308"), "{err}");
    }
}
