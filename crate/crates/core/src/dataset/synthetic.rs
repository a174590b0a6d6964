//! Gaussian class clusters with a per-date mean displacement.
//!
//! Group `m` (1-based) is shifted by a random vector of norm
//! `shift_scale * m`. Class `c` sits at `class_sep * u_c` relative to the
//! group offset, where `u_c` is a random unit direction shared by all groups.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{format_sample_name, ClassTable, Dataset, Sample, SampleId, Split};
use crate::error::{Error, Result};

/// Class names of the wheat nutrient-deficiency task; used when seven
/// classes are requested.
const NUTRIENT_CLASSES: [&str; 7] = [
    "NPKCa+m+s",
    "NPKCa",
    "_PKCa",
    "N_KCa",
    "NP_Ca",
    "NPK_",
    "unfertilized",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_groups: usize,
    pub num_classes: usize,
    pub dim: usize,
    pub train_per_group: usize,
    pub test_per_group: usize,
    pub shift_scale: f64,
    pub class_sep: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            num_groups: 3,
            num_classes: 7,
            dim: 16,
            train_per_group: 120,
            test_per_group: 40,
            shift_scale: 8.0,
            class_sep: 4.0,
            noise_sd: 1.0,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_groups", self.num_groups),
            ("num_classes", self.num_classes),
            ("dim", self.dim),
            ("train_per_group", self.train_per_group),
            ("test_per_group", self.test_per_group),
        ];
        for (key, value) in counts {
            if value == 0 {
                return Err(Error::Config(format!("generator.{key} must be positive")));
            }
        }
        if !(self.shift_scale >= 0.0 && self.shift_scale.is_finite()) {
            return Err(Error::Config("generator.shift_scale must be >= 0".into()));
        }
        if !(self.class_sep > 0.0 && self.class_sep.is_finite()) {
            return Err(Error::Config("generator.class_sep must be > 0".into()));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("generator.noise_sd must be > 0".into()));
        }
        if self.num_groups > 9999 || self.train_per_group + self.test_per_group > 9999 {
            return Err(Error::Config(
                "generator counts must fit the four-digit name format".into(),
            ));
        }
        Ok(())
    }

    pub fn date_token(group: usize) -> String {
        format!("synth{group:04}")
    }
}

/// A generated dataset plus the hidden labels of its test samples, keyed by
/// sample name.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub truth: BTreeMap<String, usize>,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn balanced_labels(rng: &mut ChaCha8Rng, count: usize, classes: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..count).map(|i| i % classes).collect();
    labels.shuffle(rng);
    labels
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<GeneratedData> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let class_dirs: Vec<Vec<f64>> = (0..config.num_classes)
        .map(|_| unit_vector(&mut rng, config.dim))
        .collect();

    let classes = if config.num_classes == NUTRIENT_CLASSES.len() {
        ClassTable::new(NUTRIENT_CLASSES.iter().map(|s| s.to_string()).collect())?
    } else {
        ClassTable::numbered(config.num_classes)
    };

    let mut train = Vec::new();
    let mut test_rows = Vec::new();
    for group in 1..=config.num_groups {
        let direction = unit_vector(&mut rng, config.dim);
        let magnitude = config.shift_scale * group as f64;
        let offset: Vec<f64> = direction.iter().map(|x| x * magnitude).collect();
        let date = SyntheticConfig::date_token(group);

        let train_labels = balanced_labels(&mut rng, config.train_per_group, config.num_classes);
        let test_labels = balanced_labels(&mut rng, config.test_per_group, config.num_classes);
        let labels = train_labels
            .into_iter()
            .map(|l| (l, Split::Train))
            .chain(test_labels.into_iter().map(|l| (l, Split::Test)));
        for (seq, (label, split)) in (1u64..).zip(labels) {
            let features: Vec<f64> = (0..config.dim)
                .map(|j| {
                    let noise: f64 = rng.sample(StandardNormal);
                    offset[j] + config.class_sep * class_dirs[label][j] + config.noise_sd * noise
                })
                .collect();
            let name = format_sample_name(&date, seq);
            match split {
                Split::Train => train.push((name, features, label)),
                Split::Test => test_rows.push((name, features, label)),
            }
        }
    }

    let mut truth = BTreeMap::new();
    let mut next_id = 0u32;
    let mut make = |name: String, features: Vec<f64>, label: Option<usize>, split| {
        let sample = Sample {
            id: SampleId(next_id),
            name,
            features,
            true_label: label,
            pseudo_label: None,
            split,
        };
        next_id += 1;
        sample
    };
    let train: Vec<Sample> = train
        .into_iter()
        .map(|(name, f, label)| make(name, f, Some(label), Split::Train))
        .collect();
    let test: Vec<Sample> = test_rows
        .into_iter()
        .map(|(name, f, label)| {
            truth.insert(name.clone(), label);
            make(name, f, None, Split::Test)
        })
        .collect();

    Ok(GeneratedData {
        dataset: Dataset::new(train, test, classes)?,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{derive_date_set, partition_by_date};

    #[test]
    fn default_config_shape() {
        let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
        assert_eq!(data.dataset.num_classes(), 7);
        assert_eq!(data.dataset.classes.name(6), Some("unfertilized"));
        assert_eq!(data.dataset.train.len(), 360);
        assert_eq!(data.dataset.test.len(), 120);
        assert_eq!(data.truth.len(), 120);
        let dates = derive_date_set(&data.dataset).unwrap();
        assert_eq!(dates.0, vec!["synth0001", "synth0002", "synth0003"]);
        for group in partition_by_date(&data.dataset).unwrap() {
            assert_eq!((group.train.len(), group.test.len()), (120, 40));
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let config = SyntheticConfig {
            num_groups: 3,
            num_classes: 7,
            dim: 16,
            train_per_group: 120,
            test_per_group: 40,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(
            generate_synthetic(&config).unwrap(),
            generate_synthetic(&config).unwrap()
        );
        let other = SyntheticConfig { seed: 43, ..config.clone() };
        assert_ne!(
            generate_synthetic(&config).unwrap().dataset,
            generate_synthetic(&other).unwrap().dataset
        );
    }

    #[test]
    fn zero_shift_gives_identical_group_means() {
        let config = SyntheticConfig {
            shift_scale: 0.0,
            train_per_group: 7000,
            test_per_group: 7,
            num_groups: 2,
            dim: 4,
            ..Default::default()
        };
        let data = generate_synthetic(&config).unwrap();
        let groups = partition_by_date(&data.dataset).unwrap();
        let mean = |samples: &[Sample]| -> Vec<f64> {
            let mut m = vec![0.0; 4];
            for s in samples {
                for (acc, v) in m.iter_mut().zip(&s.features) {
                    *acc += v / samples.len() as f64;
                }
            }
            m
        };
        let (a, b) = (mean(&groups[0].train), mean(&groups[1].train));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 0.1, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        for config in [
            SyntheticConfig { num_groups: 0, ..Default::default() },
            SyntheticConfig { shift_scale: -1.0, ..Default::default() },
            SyntheticConfig { class_sep: 0.0, ..Default::default() },
            SyntheticConfig { noise_sd: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(generate_synthetic(&config), Err(Error::Config(_))));
        }
    }
}
