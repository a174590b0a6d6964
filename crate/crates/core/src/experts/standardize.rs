use serde::{Deserialize, Serialize};

/// Smallest variance used when scaling a feature.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Per-feature affine map to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Fits on non-empty rows of equal length.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| (s / n).max(VARIANCE_FLOOR).sqrt())
            .collect();
        Standardizer { mean, scale }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_training_rows_have_unit_moments() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let s = Standardizer::fit(&rows);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
        let mean: f64 = z.iter().map(|r| r[0]).sum::<f64>() / 3.0;
        let var: f64 = z.iter().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        // constant column is floored, not divided by zero
        assert!(z.iter().all(|r| r[1] == 0.0));
        assert_eq!(s.scale()[1], VARIANCE_FLOOR.sqrt());
    }
}
