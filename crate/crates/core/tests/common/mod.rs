//! Shared fixtures and reference implementations for the integration tests.
//!
//! The reference functions here deliberately avoid the library's own rule
//! helpers: rankings, pair selection, neighbour search and vote counting are
//! all recomputed from the raw expert outputs with full sorts and plain loops.

#![allow(dead_code)]

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use deem::dataset::{format_sample_name, Sample, SampleId, Split};
use deem::experts::{Expert, ProbabilityDistribution};
use deem::pseudolabel::cosine_similarity;
use deem::Result;

pub fn train_sample(id: u32, features: Vec<f64>, label: usize) -> Sample {
    Sample {
        id: SampleId(id),
        name: format_sample_name("20200314", id as u64 + 1),
        features,
        true_label: Some(label),
        pseudo_label: None,
        split: Split::Train,
    }
}

pub fn test_sample(id: u32, features: Vec<f64>) -> Sample {
    Sample {
        id: SampleId(id),
        name: format_sample_name("20200314", id as u64 + 1),
        features,
        true_label: None,
        pseudo_label: None,
        split: Split::Test,
    }
}

/// An expert that looks its outputs up by the row index in `features[0]`.
pub struct TableExpert {
    pub num_classes: usize,
    pub probs: Vec<Vec<f64>>,
    pub embeddings: Vec<Vec<f64>>,
}

impl TableExpert {
    fn row(features: &[f64]) -> usize {
        features[0] as usize
    }
}

impl Expert for TableExpert {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbabilityDistribution> {
        ProbabilityDistribution::new(self.probs[Self::row(features)].clone())
    }

    fn embed(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.embeddings[Self::row(features)].clone())
    }
}

/// A distribution whose ranking starts `first, second`; every other class
/// shares the remaining mass equally.
pub fn ranked_distribution(classes: usize, first: usize, second: usize) -> Vec<f64> {
    match classes {
        1 => vec![1.0],
        2 => {
            let mut p = vec![0.0; 2];
            p[first] = 0.6;
            p[second] = 0.4;
            p
        }
        _ => {
            let rest = 0.2 / (classes - 2) as f64;
            let mut p = vec![rest; classes];
            p[first] = 0.5;
            p[second] = 0.3;
            p
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Routed {
    Unanimous(usize),
    TopTwo(usize),
    Abstain,
}

/// Class indices by descending probability, ties to the lower index.
pub fn reference_ranking(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| match probs[b].partial_cmp(&probs[a]).unwrap() {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    order
}

/// Full-sort nearest neighbours by cosine similarity; zero vectors score 0.
pub fn reference_topk(query: &[f64], train: &[Vec<f64>], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| (i, cosine_similarity(query, t).unwrap_or(0.0)))
        .collect();
    all.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => a.0.cmp(&b.0),
        other => other,
    });
    all.truncate(k);
    all
}

/// Straight-line evaluation of the three labeling cases for one sample.
pub fn reference_route<E: Expert>(experts: &[E], sample: &Sample, train: &[Sample], k: usize) -> Routed {
    let classes = experts[0].num_classes();
    let rankings: Vec<Vec<usize>> = experts
        .iter()
        .map(|e| reference_ranking(e.predict_proba(&sample.features).unwrap().probs()))
        .collect();
    let top1: Vec<usize> = rankings.iter().map(|r| r[0]).collect();

    // Case 1
    if top1.iter().all(|&l| l == top1[0]) {
        return Routed::Unanimous(top1[0]);
    }

    // Case 2: first pair in (low, high) order held by at least E - 1 experts
    let e = experts.len();
    let pairs: Vec<(usize, usize)> = rankings
        .iter()
        .map(|r| {
            let second = if classes > 1 { r[1] } else { r[0] };
            (r[0].min(second), r[0].max(second))
        })
        .collect();
    let mut chosen = None;
    'search: for low in 0..classes {
        for high in low..classes {
            let support = pairs.iter().filter(|&&p| p == (low, high)).count();
            if e >= 2 && support >= e - 1 {
                chosen = Some((low, high));
                break 'search;
            }
        }
    }
    let Some(pair) = chosen else {
        return Routed::Abstain;
    };
    let mut candidate = 0;
    let mut best = 0;
    for class in 0..classes {
        let freq = (0..e).filter(|&i| pairs[i] == pair && top1[i] == class).count();
        if freq > best {
            best = freq;
            candidate = class;
        }
    }

    let k = k.min(train.len());
    if k == 0 {
        return Routed::Abstain;
    }
    let mut votes = vec![0usize; classes];
    for expert in experts {
        let query = expert.embed(&sample.features).unwrap();
        let embedded: Vec<Vec<f64>> = train.iter().map(|s| expert.embed(&s.features).unwrap()).collect();
        for (i, _) in reference_topk(&query, &embedded, k) {
            votes[train[i].target().unwrap()] += 1;
        }
    }
    let top = *votes.iter().max().unwrap();
    let winners: Vec<usize> = (0..classes).filter(|&c| votes[c] == top).collect();
    if winners == [candidate] {
        Routed::TopTwo(candidate)
    } else {
        Routed::Abstain
    }
}

/// Probability vector with values on a coarse grid so exact ties happen.
pub fn coarse_distribution(rng: &mut ChaCha8Rng, classes: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(1..=5) as f64).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Small integer vector; may be zero.
pub fn coarse_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-2..=2) as f64).collect()
}
