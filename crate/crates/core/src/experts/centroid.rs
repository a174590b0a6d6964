//! Nearest-centroid classification, optionally after a seeded random
//! linear projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ProbabilityDistribution;

pub const DEFAULT_PROJECTION_DIM: usize = 8;

/// Gaussian matrix of shape `out_dim x in_dim`, entries scaled by
/// `1/sqrt(out_dim)`.
pub fn random_projection(in_dim: usize, out_dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (out_dim as f64).sqrt();
    (0..out_dim)
        .map(|_| {
            (0..in_dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    projection: Option<Vec<Vec<f64>>>,
    /// One centroid per class; absent classes hold zeros and are masked.
    centroids: Vec<Vec<f64>>,
    temperature: f64,
}

impl CentroidModel {
    pub fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        num_classes: usize,
        projection: Option<Vec<Vec<f64>>>,
        temperature: f64,
    ) -> Self {
        let project = |row: &[f64]| -> Vec<f64> {
            match &projection {
                Some(p) => p.iter().map(|r| dot(r, row)).collect(),
                None => row.to_vec(),
            }
        };
        let dim = project(&rows[0]).len();
        let mut centroids = vec![vec![0.0; dim]; num_classes];
        let mut counts = vec![0usize; num_classes];
        for (row, &label) in rows.iter().zip(labels) {
            for (c, v) in centroids[label].iter_mut().zip(project(row)) {
                *c += v;
            }
            counts[label] += 1;
        }
        for (centroid, &count) in centroids.iter_mut().zip(&counts) {
            if count > 0 {
                centroid.iter_mut().for_each(|c| *c /= count as f64);
            }
        }
        CentroidModel {
            projection,
            centroids,
            temperature,
        }
    }

    pub fn embed(&self, z: &[f64]) -> Vec<f64> {
        match &self.projection {
            Some(p) => p.iter().map(|r| dot(r, z)).collect(),
            None => z.to_vec(),
        }
    }

    pub fn predict_proba(&self, z: &[f64], present: &[bool]) -> ProbabilityDistribution {
        let e = self.embed(z);
        let scores: Vec<f64> = self
            .centroids
            .iter()
            .map(|c| {
                let dist = c.iter().zip(&e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                -dist / self.temperature
            })
            .collect();
        ProbabilityDistribution::softmax_masked(&scores, present)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
