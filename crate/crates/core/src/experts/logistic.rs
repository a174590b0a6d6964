//! Multinomial logistic regression fitted by full-batch gradient descent.
//!
//! Parameters are stored flat: `num_classes * dim` weights (row per class)
//! followed by `num_classes` biases. The objective is mean cross-entropy
//! plus `weight_decay / 2 * ||W||^2`; biases are not penalized. Softmax is
//! taken over present classes only, so absent classes keep zero weights.

use serde::{Deserialize, Serialize};

use super::ProbabilityDistribution;

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;
pub const DEFAULT_EPOCHS: usize = 300;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-3;

/// The training objective over a fixed design matrix.
pub struct LogisticObjective<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    present: &'a [bool],
    weight_decay: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(
        rows: &'a [Vec<f64>],
        labels: &'a [usize],
        present: &'a [bool],
        weight_decay: f64,
    ) -> Self {
        LogisticObjective {
            rows,
            labels,
            present,
            weight_decay,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.present.len()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn num_params(&self) -> usize {
        self.num_classes() * (self.dim() + 1)
    }

    fn probs(&self, params: &[f64], row: &[f64]) -> Vec<f64> {
        let scores = logits(params, self.num_classes(), row);
        ProbabilityDistribution::softmax_masked(&scores, self.present).0
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let n = self.rows.len() as f64;
        let data: f64 = self
            .rows
            .iter()
            .zip(self.labels)
            .map(|(row, &y)| -self.probs(params, row)[y].ln())
            .sum::<f64>()
            / n;
        let weights = &params[..self.num_classes() * self.dim()];
        data + 0.5 * self.weight_decay * weights.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let (classes, dim) = (self.num_classes(), self.dim());
        let n = self.rows.len() as f64;
        let mut grad = vec![0.0; self.num_params()];
        for (row, &y) in self.rows.iter().zip(self.labels) {
            let mut residual = self.probs(params, row);
            residual[y] -= 1.0;
            for (c, r) in residual.iter().enumerate() {
                let w = &mut grad[c * dim..(c + 1) * dim];
                for (g, x) in w.iter_mut().zip(row) {
                    *g += r * x / n;
                }
                grad[classes * dim + c] += r / n;
            }
        }
        for (g, w) in grad[..classes * dim].iter_mut().zip(params) {
            *g += self.weight_decay * w;
        }
        grad
    }
}

fn logits(params: &[f64], classes: usize, row: &[f64]) -> Vec<f64> {
    let dim = row.len();
    (0..classes)
        .map(|c| {
            let w = &params[c * dim..(c + 1) * dim];
            w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + params[classes * dim + c]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    num_classes: usize,
    params: Vec<f64>,
}

impl LogisticModel {
    /// Gradient descent from zero parameters for a fixed number of epochs.
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        present: &[bool],
        learning_rate: f64,
        epochs: usize,
        weight_decay: f64,
    ) -> Self {
        let objective = LogisticObjective::new(rows, labels, present, weight_decay);
        let mut params = vec![0.0; objective.num_params()];
        for _ in 0..epochs {
            let grad = objective.gradient(&params);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= learning_rate * g;
            }
        }
        LogisticModel {
            num_classes: present.len(),
            params,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        logits(&self.params, self.num_classes, z)
    }

    pub fn predict_proba(&self, z: &[f64], present: &[bool]) -> ProbabilityDistribution {
        ProbabilityDistribution::softmax_masked(&self.logits(z), present)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_decreases_under_training() {
        let rows = vec![vec![1.0, 0.0], vec![-1.0, 0.5], vec![0.2, -1.0]];
        let labels = vec![0, 1, 2];
        let present = vec![true; 3];
        let objective = LogisticObjective::new(&rows, &labels, &present, 1e-3);
        let start = objective.loss(&vec![0.0; objective.num_params()]);
        let model = LogisticModel::fit(&rows, &labels, &present, 0.1, 100, 1e-3);
        assert!(objective.loss(model.params()) < start);
        assert!((start - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn absent_class_weights_stay_zero() {
        let rows = vec![vec![1.0], vec![-1.0]];
        let labels = vec![0, 2];
        let present = vec![true, false, true];
        let model = LogisticModel::fit(&rows, &labels, &present, 0.5, 50, 1e-3);
        assert_eq!(model.params()[1], 0.0);
        assert_eq!(model.params()[3 + 1], 0.0);
    }
}
