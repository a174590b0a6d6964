//! Lightweight classifier families behind one train/predict/embed surface.
//!
//! Each family has a different inductive bias so that ensemble members
//! disagree in useful ways. Every family works in standardized feature
//! space, and classes missing from the training data always get probability
//! exactly zero.

mod centroid;
mod gaussian_nb;
mod knn;
pub mod logistic;
mod standardize;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};

pub use centroid::CentroidModel;
pub use gaussian_nb::GaussianNbModel;
pub use knn::KnnModel;
pub use logistic::LogisticModel;
pub use standardize::Standardizer;

/// Format tag written into serialized ensembles.
pub const ENSEMBLE_FORMAT: &str = "deem-ensemble";
pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

/// A validated class-probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityDistribution(Vec<f64>);

impl ProbabilityDistribution {
    /// Accepts `probs` when every entry is finite, in `[0, 1]`, and the sum
    /// is within `1e-9` of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Data("empty probability vector".into()));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::Data(format!("not a probability distribution: {probs:?}")));
        }
        Ok(ProbabilityDistribution(probs))
    }

    /// Softmax over the classes flagged in `present`; the rest get zero.
    pub(crate) fn softmax_masked(scores: &[f64], present: &[bool]) -> Self {
        let max = scores
            .iter()
            .zip(present)
            .filter(|(_, &p)| p)
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = scores
            .iter()
            .zip(present)
            .map(|(s, &p)| if p { (s - max).exp() } else { 0.0 })
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        ProbabilityDistribution(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn max_prob(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Indices of the `n` largest probabilities, highest first; equal
/// probabilities are ordered by lower class index.
pub fn top_labels(dist: &ProbabilityDistribution, n: usize) -> Result<Vec<usize>> {
    let classes = dist.num_classes();
    if n == 0 || n > classes {
        return Err(Error::InvalidN { n, classes });
    }
    let probs = dist.probs();
    let mut order: Vec<usize> = (0..classes).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order.truncate(n);
    Ok(order)
}

/// The prediction surface the pseudo-labeling rules need from a classifier.
pub trait Expert: Send + Sync {
    fn num_classes(&self) -> usize;
    fn predict_proba(&self, features: &[f64]) -> Result<ProbabilityDistribution>;
    fn embed(&self, features: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertFamily {
    NearestCentroid,
    LogisticRegression,
    Knn,
    GaussianNb,
    RandomProjectionCentroid,
}

impl ExpertFamily {
    /// Families in the order used when growing an ensemble one expert at a
    /// time.
    pub const ORDER: [ExpertFamily; 5] = [
        ExpertFamily::NearestCentroid,
        ExpertFamily::LogisticRegression,
        ExpertFamily::Knn,
        ExpertFamily::GaussianNb,
        ExpertFamily::RandomProjectionCentroid,
    ];

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            ExpertFamily::NearestCentroid => &["temperature", "input_noise"],
            ExpertFamily::LogisticRegression => {
                &["learning_rate", "epochs", "weight_decay", "input_noise"]
            }
            ExpertFamily::Knn => &["k", "input_noise"],
            ExpertFamily::GaussianNb => &["var_floor", "input_noise"],
            ExpertFamily::RandomProjectionCentroid => {
                &["projection_dim", "temperature", "input_noise"]
            }
        }
    }
}

impl fmt::Display for ExpertFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExpertFamily::NearestCentroid => "nearest_centroid",
            ExpertFamily::LogisticRegression => "logistic_regression",
            ExpertFamily::Knn => "knn",
            ExpertFamily::GaussianNb => "gaussian_nb",
            ExpertFamily::RandomProjectionCentroid => "random_projection_centroid",
        };
        f.write_str(name)
    }
}

/// Declarative description of one expert: family, hyperparameters, seed.
///
/// Recognised keys per family (defaults in parentheses):
///
/// | family | keys |
/// |---|---|
/// | `nearest_centroid` | `temperature` (1.0) |
/// | `logistic_regression` | `learning_rate` (0.1), `epochs` (300), `weight_decay` (1e-3) |
/// | `knn` | `k` (7) |
/// | `gaussian_nb` | `var_floor` (1e-2) |
/// | `random_projection_centroid` | `projection_dim` (8), `temperature` (1.0) |
///
/// Every family also accepts `input_noise` (0.0): the standard deviation of
/// seeded Gaussian jitter added to this expert's copy of the training
/// features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertSpec {
    pub family: ExpertFamily,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ExpertSpec {
    pub fn new(family: ExpertFamily, seed: u64) -> Self {
        ExpertSpec {
            family,
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// The first `count` families of [`ExpertFamily::ORDER`], seeded by
    /// position.
    pub fn default_ensemble(count: usize) -> Vec<ExpertSpec> {
        ExpertFamily::ORDER
            .iter()
            .cycle()
            .take(count)
            .enumerate()
            .map(|(i, &family)| ExpertSpec::new(family, i as u64))
            .collect()
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = self.family.allowed_params();
        for (key, value) in &self.params {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "{} does not accept parameter {key:?} (allowed: {})",
                    self.family,
                    allowed.join(", ")
                )));
            }
            if !value.is_finite() {
                return Err(Error::Config(format!("{}.{key} must be finite", self.family)));
            }
        }
        let positive = |key: &str, default: f64| -> Result<f64> {
            let v = self.param(key, default);
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::Config(format!("{}.{key} must be > 0", self.family)))
            }
        };
        let whole = |key: &str, default: f64| -> Result<usize> {
            let v = positive(key, default)?;
            if v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{}.{key} must be an integer", self.family)))
            }
        };
        if self.param("input_noise", 0.0) < 0.0 {
            return Err(Error::Config(format!("{}.input_noise must be >= 0", self.family)));
        }
        match self.family {
            ExpertFamily::NearestCentroid => {
                positive("temperature", 1.0)?;
            }
            ExpertFamily::LogisticRegression => {
                positive("learning_rate", logistic::DEFAULT_LEARNING_RATE)?;
                whole("epochs", logistic::DEFAULT_EPOCHS as f64)?;
                if self.param("weight_decay", logistic::DEFAULT_WEIGHT_DECAY) < 0.0 {
                    return Err(Error::Config("logistic_regression.weight_decay must be >= 0".into()));
                }
            }
            ExpertFamily::Knn => {
                whole("k", knn::DEFAULT_K as f64)?;
            }
            ExpertFamily::GaussianNb => {
                positive("var_floor", gaussian_nb::DEFAULT_VAR_FLOOR)?;
            }
            ExpertFamily::RandomProjectionCentroid => {
                whole("projection_dim", centroid::DEFAULT_PROJECTION_DIM as f64)?;
                positive("temperature", 1.0)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FittedModel {
    Centroid(CentroidModel),
    Logistic(LogisticModel),
    Knn(KnnModel),
    GaussianNb(GaussianNbModel),
}

/// A fitted expert. Immutable after [`train_expert`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedExpert {
    spec: ExpertSpec,
    num_classes: usize,
    present: Vec<bool>,
    standardizer: Standardizer,
    model: FittedModel,
}

impl TrainedExpert {
    pub fn spec(&self) -> &ExpertSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    /// Which classes had at least one training sample.
    pub fn present_classes(&self) -> &[bool] {
        &self.present
    }

    fn standardized(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: features.len(),
            });
        }
        Ok(self.standardizer.apply(features))
    }
}

impl Expert for TrainedExpert {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbabilityDistribution> {
        let z = self.standardized(features)?;
        Ok(match &self.model {
            FittedModel::Centroid(m) => m.predict_proba(&z, &self.present),
            FittedModel::Logistic(m) => m.predict_proba(&z, &self.present),
            FittedModel::Knn(m) => m.predict_proba(&z, &self.present),
            FittedModel::GaussianNb(m) => m.predict_proba(&z, &self.present),
        })
    }

    fn embed(&self, features: &[f64]) -> Result<Vec<f64>> {
        let z = self.standardized(features)?;
        Ok(match &self.model {
            FittedModel::Centroid(m) => m.embed(&z),
            FittedModel::Logistic(m) => m.logits(&z),
            FittedModel::Knn(_) => z,
            FittedModel::GaussianNb(m) => m.log_likelihoods(&z),
        })
    }
}

/// Fits one expert on labeled samples. Each sample's [`Sample::target`] is
/// its training label.
pub fn train_expert(spec: &ExpertSpec, train: &[Sample], num_classes: usize) -> Result<TrainedExpert> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let dim = train[0].features.len();
    let mut rows = Vec::with_capacity(train.len());
    let mut labels = Vec::with_capacity(train.len());
    for sample in train {
        if sample.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: sample.features.len(),
            });
        }
        let label = sample
            .target()
            .ok_or_else(|| Error::Data(format!("training sample {} has no label", sample.name)))?;
        if label >= num_classes {
            return Err(Error::Data(format!(
                "training sample {} has label {label} outside {num_classes} classes",
                sample.name
            )));
        }
        rows.push(sample.features.clone());
        labels.push(label);
    }

    let noise = spec.param("input_noise", 0.0);
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6a09_e667_f3bc_c908);
        for row in &mut rows {
            for v in row.iter_mut() {
                let jitter: f64 = rng.sample(StandardNormal);
                *v += noise * jitter;
            }
        }
    }

    let mut present = vec![false; num_classes];
    for &label in &labels {
        present[label] = true;
    }
    let standardizer = Standardizer::fit(&rows);
    let z: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();

    let model = match spec.family {
        ExpertFamily::NearestCentroid => FittedModel::Centroid(CentroidModel::fit(
            &z,
            &labels,
            num_classes,
            None,
            spec.param("temperature", 1.0),
        )),
        ExpertFamily::RandomProjectionCentroid => {
            let projection = centroid::random_projection(
                dim,
                spec.param("projection_dim", centroid::DEFAULT_PROJECTION_DIM as f64) as usize,
                spec.seed,
            );
            FittedModel::Centroid(CentroidModel::fit(
                &z,
                &labels,
                num_classes,
                Some(projection),
                spec.param("temperature", 1.0),
            ))
        }
        ExpertFamily::LogisticRegression => FittedModel::Logistic(LogisticModel::fit(
            &z,
            &labels,
            &present,
            spec.param("learning_rate", logistic::DEFAULT_LEARNING_RATE),
            spec.param("epochs", logistic::DEFAULT_EPOCHS as f64) as usize,
            spec.param("weight_decay", logistic::DEFAULT_WEIGHT_DECAY),
        )),
        ExpertFamily::Knn => FittedModel::Knn(KnnModel::fit(
            z,
            labels,
            spec.param("k", knn::DEFAULT_K as f64) as usize,
        )),
        ExpertFamily::GaussianNb => FittedModel::GaussianNb(GaussianNbModel::fit(
            &z,
            &labels,
            num_classes,
            spec.param("var_floor", gaussian_nb::DEFAULT_VAR_FLOOR),
        )),
    };

    Ok(TrainedExpert {
        spec: spec.clone(),
        num_classes,
        present,
        standardizer,
        model,
    })
}

/// An ordered, non-empty list of experts sharing one class set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    experts: Vec<TrainedExpert>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleFile {
    format: String,
    version: u32,
    experts: Vec<TrainedExpert>,
}

impl Ensemble {
    pub fn new(experts: Vec<TrainedExpert>) -> Result<Self> {
        let first = experts
            .first()
            .ok_or_else(|| Error::Config("an ensemble needs at least one expert".into()))?;
        if experts.iter().any(|e| e.num_classes != first.num_classes) {
            return Err(Error::Data("experts disagree on the class set".into()));
        }
        Ok(Ensemble { experts })
    }

    pub fn experts(&self) -> &[TrainedExpert] {
        &self.experts
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.experts[0].num_classes
    }

    /// Plurality over expert Top-1 votes, ties to the lower class index.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        plurality_top1(&self.experts, features)
    }

    pub fn to_json(&self) -> String {
        let file = EnsembleFile {
            format: ENSEMBLE_FORMAT.into(),
            version: ENSEMBLE_FORMAT_VERSION,
            experts: self.experts.clone(),
        };
        serde_json::to_string(&file).expect("ensemble serialization is infallible")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let file: EnsembleFile = serde_json::from_str(text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            line: e.line(),
            source: e,
        })?;
        if file.format != ENSEMBLE_FORMAT || file.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported model format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        Ensemble::new(file.experts)
    }
}

/// Plurality over each expert's Top-1 label, frequency ties to the lower
/// class index.
pub fn plurality_top1<E: Expert>(experts: &[E], features: &[f64]) -> Result<usize> {
    let classes = experts
        .first()
        .map(Expert::num_classes)
        .ok_or_else(|| Error::Config("no experts to vote".into()))?;
    let mut votes = vec![0usize; classes];
    for expert in experts {
        votes[top_labels(&expert.predict_proba(features)?, 1)?[0]] += 1;
    }
    Ok(argmax_lowest(&votes))
}

/// Index of the largest count; the lowest index wins ties.
pub(crate) fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Trains every spec on the same data, in parallel, keeping spec order.
pub fn train_ensemble(specs: &[ExpertSpec], train: &[Sample], num_classes: usize) -> Result<Ensemble> {
    if specs.is_empty() {
        return Err(Error::Config("no expert specs given".into()));
    }
    let experts = specs
        .par_iter()
        .map(|spec| train_expert(spec, train, num_classes))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(experts)
}
