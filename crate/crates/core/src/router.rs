//! Date-routed final model.
//!
//! A [`BranchedModel`] holds one ensemble per date. Inference parses the date
//! from the sample name and asks that branch for a plurality vote.
//!
//! On disk a model bundle is a directory with `model.json` (format tag,
//! class table, config digest, per-branch round counts) plus one
//! `<date>.json` ensemble file per branch.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{parse_sample_name, ClassTable, DateGroup, Sample, SampleId};
use crate::error::{Error, Result};
use crate::experts::{train_ensemble, Ensemble, ExpertSpec};

pub const BUNDLE_MANIFEST: &str = "model.json";
pub const BUNDLE_FORMAT: &str = "deem-branched-model";
pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub config_digest: String,
    /// Pseudo-labeling rounds each branch needed.
    pub rounds: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchedModel {
    branches: BTreeMap<String, Ensemble>,
    classes: ClassTable,
    metadata: ModelMetadata,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    format: String,
    version: u32,
    classes: ClassTable,
    branches: Vec<String>,
    metadata: ModelMetadata,
}

impl BranchedModel {
    pub fn from_branches(
        branches: BTreeMap<String, Ensemble>,
        classes: ClassTable,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Data("a branched model needs at least one branch".into()));
        }
        for (date, ensemble) in &branches {
            check_branch_key(date)?;
            if ensemble.num_classes() != classes.len() {
                return Err(Error::Data(format!(
                    "branch {date:?} predicts {} classes, class table has {}",
                    ensemble.num_classes(),
                    classes.len()
                )));
            }
        }
        Ok(BranchedModel {
            branches,
            classes,
            metadata,
        })
    }

    pub fn branches(&self) -> &BTreeMap<String, Ensemble> {
        &self.branches
    }

    pub fn branch(&self, date: &str) -> Option<&Ensemble> {
        self.branches.get(date)
    }

    pub fn dates(&self) -> impl Iterator<Item = &str> {
        self.branches.keys().map(String::as_str)
    }

    pub fn classes(&self) -> &ClassTable {
        &self.classes
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// Swaps one branch, leaving every other branch untouched.
    pub fn replace_branch(&mut self, date: &str, ensemble: Ensemble) -> Result<Option<Ensemble>> {
        check_branch_key(date)?;
        if ensemble.num_classes() != self.classes.len() {
            return Err(Error::Data("replacement branch has a different class count".into()));
        }
        Ok(self.branches.insert(date.to_string(), ensemble))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = BundleManifest {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_FORMAT_VERSION,
            classes: self.classes.clone(),
            branches: self.branches.keys().cloned().collect(),
            metadata: self.metadata.clone(),
        };
        let path = dir.join(BUNDLE_MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        for (date, ensemble) in &self.branches {
            let path = dir.join(format!("{date}.json"));
            fs::write(&path, ensemble.to_json() + "\n").map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(BUNDLE_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: BundleManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.clone(),
            line: e.line(),
            source: e,
        })?;
        if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported bundle format {} v{}",
                path.display(),
                manifest.format,
                manifest.version
            )));
        }
        let mut branches = BTreeMap::new();
        for date in manifest.branches {
            check_branch_key(&date)?;
            let path = dir.join(format!("{date}.json"));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            branches.insert(date, Ensemble::from_json(&text, &path)?);
        }
        BranchedModel::from_branches(branches, manifest.classes, manifest.metadata)
    }
}

/// Branch keys double as file names.
fn check_branch_key(date: &str) -> Result<()> {
    if date.is_empty() || date.starts_with('.') || date.contains(['/', '\\']) {
        return Err(Error::Data(format!("date {date:?} cannot name a model branch")));
    }
    Ok(())
}

/// Trains a fresh ensemble per group on its completed training set.
///
/// Each entry pairs a group with its final training set (original train plus
/// every test sample carrying a pseudo-label). Branches train in parallel.
pub fn build_final_model(
    groups: &[(DateGroup, Vec<Sample>)],
    specs: &[ExpertSpec],
    classes: &ClassTable,
    metadata: ModelMetadata,
) -> Result<BranchedModel> {
    for (group, final_train) in groups {
        let labeled: BTreeSet<SampleId> = final_train
            .iter()
            .filter(|s| s.target().is_some())
            .map(|s| s.id)
            .collect();
        let missing = group.test.iter().filter(|s| !labeled.contains(&s.id)).count();
        if missing > 0 {
            return Err(Error::UnlabeledTestSamples {
                date: group.date.clone(),
                count: missing,
            });
        }
    }
    let branches = groups
        .par_iter()
        .map(|(group, final_train)| {
            train_ensemble(specs, final_train, classes.len()).map(|e| (group.date.clone(), e))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    BranchedModel::from_branches(branches, classes.clone(), metadata)
}

/// Routes a sample to its date branch and returns the branch's prediction.
pub fn infer(model: &BranchedModel, name: &str, features: &[f64]) -> Result<usize> {
    let (date, _) = parse_sample_name(name)?;
    let branch = model
        .branches
        .get(&date)
        .ok_or_else(|| Error::UnknownDate(date.clone()))?;
    branch.predict(features)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_date: BTreeMap<String, GroupAccuracy>,
    /// Unweighted mean of the per-date accuracies.
    pub average: f64,
    /// Correct over total across all dates.
    pub micro: f64,
}

/// Top-1 accuracy from `(name, predicted, truth)` triples, grouped by the
/// date in each name.
pub fn accuracy_by_date<'a, I>(outcomes: I) -> Result<Evaluation>
where
    I: IntoIterator<Item = (&'a str, usize, usize)>,
{
    let mut per_date: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (name, predicted, truth) in outcomes {
        let (date, _) = parse_sample_name(name)?;
        let entry = per_date.entry(date).or_default();
        entry.0 += usize::from(predicted == truth);
        entry.1 += 1;
    }
    if per_date.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let (correct, total) = per_date
        .values()
        .fold((0, 0), |(c, t), &(gc, gt)| (c + gc, t + gt));
    let per_date: BTreeMap<String, GroupAccuracy> = per_date
        .into_iter()
        .map(|(date, (correct, total))| {
            let accuracy = correct as f64 / total as f64;
            (date, GroupAccuracy { correct, total, accuracy })
        })
        .collect();
    let average = per_date.values().map(|g| g.accuracy).sum::<f64>() / per_date.len() as f64;
    Ok(Evaluation {
        per_date,
        average,
        micro: correct as f64 / total as f64,
    })
}

/// Runs [`infer`] on every `(name, features, truth)` triple and scores it.
pub fn evaluate(model: &BranchedModel, samples: &[(&str, &[f64], usize)]) -> Result<Evaluation> {
    let predictions = samples
        .iter()
        .map(|&(name, features, truth)| Ok((name, infer(model, name, features)?, truth)))
        .collect::<Result<Vec<_>>>()?;
    accuracy_by_date(predictions)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub name: String,
    pub predicted_label: String,
}

/// Predicts every sample and returns records sorted by name.
pub fn predict_samples(model: &BranchedModel, samples: &[Sample]) -> Result<Vec<Prediction>> {
    let mut out = samples
        .iter()
        .map(|s| {
            let label = infer(model, &s.name, &s.features)?;
            Ok(Prediction {
                name: s.name.clone(),
                predicted_label: model.classes.name(label).unwrap_or_default().to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let mut text = Vec::new();
    for p in predictions {
        serde_json::to_writer(&mut text, p).expect("prediction serializes");
        text.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&text).map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source: e,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(name: &str, p: usize, t: usize) -> (&str, usize, usize) {
        (name, p, t)
    }

    #[test]
    fn accuracy_arithmetic() {
        let all_right = [outcome("a_1.jpg", 1, 1), outcome("b_1.jpg", 0, 0)];
        let e = accuracy_by_date(all_right).unwrap();
        assert_eq!((e.average, e.micro), (1.0, 1.0));
        let all_wrong = [outcome("a_1.jpg", 1, 0), outcome("b_1.jpg", 0, 2)];
        let e = accuracy_by_date(all_wrong).unwrap();
        assert_eq!((e.average, e.micro), (0.0, 0.0));
        let three_of_four = [
            outcome("a_1.jpg", 1, 1),
            outcome("a_2.jpg", 1, 1),
            outcome("a_3.jpg", 1, 1),
            outcome("b_1.jpg", 1, 0),
        ];
        let e = accuracy_by_date(three_of_four).unwrap();
        assert_eq!(e.micro, 0.75);
        assert_eq!(e.per_date["a"].accuracy, 1.0);
        assert_eq!(e.average, 0.5);
        assert!(matches!(accuracy_by_date([]), Err(Error::EmptyEvaluationSet)));
    }

    #[test]
    fn rejects_path_like_branch_keys() {
        for bad in ["", "../x", "a/b", ".hidden"] {
            assert!(check_branch_key(bad).is_err());
        }
        assert!(check_branch_key("20200314").is_ok());
    }
}
