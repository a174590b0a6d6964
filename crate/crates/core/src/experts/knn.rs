use serde::{Deserialize, Serialize};

use super::ProbabilityDistribution;

pub const DEFAULT_K: usize = 7;

/// Euclidean k-nearest-neighbour vote with Laplace smoothing over the
/// classes present in training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    k: usize,
}

impl KnnModel {
    /// `k` is clamped to the number of training rows.
    pub fn fit(rows: Vec<Vec<f64>>, labels: Vec<usize>, k: usize) -> Self {
        let k = k.min(rows.len());
        KnnModel { rows, labels, k }
    }

    /// Labels of the `k` closest rows; equal distances go to the lower row
    /// index.
    fn neighbor_labels(&self, z: &[f64]) -> Vec<usize> {
        let mut dists: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dists[..self.k].iter().map(|&(_, i)| self.labels[i]).collect()
    }

    pub fn predict_proba(&self, z: &[f64], present: &[bool]) -> ProbabilityDistribution {
        let mut counts = vec![0usize; present.len()];
        for label in self.neighbor_labels(z) {
            counts[label] += 1;
        }
        let present_count = present.iter().filter(|&&p| p).count() as f64;
        let denom = self.k as f64 + present_count;
        let probs: Vec<f64> = counts
            .iter()
            .zip(present)
            .map(|(&c, &p)| if p { (c as f64 + 1.0) / denom } else { 0.0 })
            .collect();
        ProbabilityDistribution(probs)
    }
}
