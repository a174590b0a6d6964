use serde::{Deserialize, Serialize};

use super::ProbabilityDistribution;

pub const DEFAULT_VAR_FLOOR: f64 = 1e-2;

/// Diagonal Gaussian class-conditionals with empirical priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    /// Present classes in ascending order; the embedding follows this order.
    classes: Vec<usize>,
    num_classes: usize,
    log_priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
}

impl GaussianNbModel {
    pub fn fit(rows: &[Vec<f64>], labels: &[usize], num_classes: usize, var_floor: f64) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();

        let (mut log_priors, mut means, mut vars) = (Vec::new(), Vec::new(), Vec::new());
        for &class in &classes {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == class)
                .map(|(r, _)| r)
                .collect();
            let count = members.len() as f64;
            let mut mean = vec![0.0; dim];
            for row in &members {
                for (m, v) in mean.iter_mut().zip(row.iter()) {
                    *m += v / count;
                }
            }
            let mut var = vec![0.0; dim];
            for row in &members {
                for ((s, v), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
                    *s += (v - m) * (v - m) / count;
                }
            }
            var.iter_mut().for_each(|v| *v = v.max(var_floor));
            log_priors.push((count / n).ln());
            means.push(mean);
            vars.push(var);
        }
        GaussianNbModel {
            classes,
            num_classes,
            log_priors,
            means,
            vars,
        }
    }

    /// Log-likelihood of `z` under each present class, in class order.
    pub fn log_likelihoods(&self, z: &[f64]) -> Vec<f64> {
        self.means
            .iter()
            .zip(&self.vars)
            .map(|(mean, var)| {
                z.iter()
                    .zip(mean)
                    .zip(var)
                    .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v))
                    .sum()
            })
            .collect()
    }

    pub fn predict_proba(&self, z: &[f64], present: &[bool]) -> ProbabilityDistribution {
        let mut scores = vec![0.0; self.num_classes];
        for ((&class, ll), prior) in self.classes.iter().zip(self.log_likelihoods(z)).zip(&self.log_priors) {
            scores[class] = ll + prior;
        }
        ProbabilityDistribution::softmax_masked(&scores, present)
    }
}
