//! Samples, date-keyed partitioning and validation reservation.
//!
//! Every sample name has the shape `<date>_<sequence>.<ext>`. The date token
//! decides which group (and later which model branch) a sample belongs to.

mod manifest;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{
    load_data_dir, read_class_table, read_manifest, read_truth, write_class_table,
    write_data_dir, write_manifest, write_truth, CLASS_TABLE_FILE, MANIFEST_FILE, TRUTH_FILE,
};
pub use synthetic::{generate_synthetic, GeneratedData, SyntheticConfig};

/// Opaque sample identifier. Assigned in manifest order at load time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleId(pub u32);

impl std::fmt::Display for SampleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: SampleId,
    pub name: String,
    pub features: Vec<f64>,
    pub true_label: Option<usize>,
    pub pseudo_label: Option<usize>,
    pub split: Split,
}

impl Sample {
    /// The label used as a training target: the ground-truth label when
    /// present, otherwise an incorporated pseudo-label.
    pub fn target(&self) -> Option<usize> {
        self.true_label.or(self.pseudo_label)
    }

    pub fn date(&self) -> Result<String> {
        parse_sample_name(&self.name).map(|(date, _)| date)
    }
}

/// Ordered class-name table; the index of a name is its class id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassTable(Vec<String>);

impl ClassTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Data("class table is empty".into()));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(Error::Data("class table contains an empty name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Data(format!("duplicate class name {name:?}")));
            }
        }
        Ok(ClassTable(names))
    }

    /// `class0`, `class1`, ...
    pub fn numbered(count: usize) -> Self {
        ClassTable((0..count).map(|c| format!("class{c}")).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn name(&self, class: usize) -> Option<&str> {
        self.0.get(class).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub classes: ClassTable,
    pub dim: usize,
}

impl Dataset {
    /// Builds a dataset and checks its invariants: unique ids and names,
    /// parseable names, labeled train samples, unlabeled test samples,
    /// in-range labels and a common finite feature dimension.
    pub fn new(train: Vec<Sample>, test: Vec<Sample>, classes: ClassTable) -> Result<Self> {
        let dim = train
            .first()
            .or(test.first())
            .map(|s| s.features.len())
            .ok_or_else(|| Error::Data("dataset has no samples".into()))?;
        if dim == 0 {
            return Err(Error::Data("feature vectors are empty".into()));
        }
        let mut ids = HashSet::new();
        let mut keys = HashSet::new();
        for (sample, expected) in train
            .iter()
            .map(|s| (s, Split::Train))
            .chain(test.iter().map(|s| (s, Split::Test)))
        {
            if sample.split != expected {
                return Err(Error::Data(format!(
                    "sample {} is stored under the wrong split",
                    sample.name
                )));
            }
            if !ids.insert(sample.id) {
                return Err(Error::Data(format!("duplicate sample id {}", sample.id)));
            }
            let key = parse_sample_name(&sample.name)?;
            if !keys.insert(key) {
                return Err(Error::Data(format!(
                    "duplicate (date, sequence) key in {}",
                    sample.name
                )));
            }
            if sample.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: sample.features.len(),
                });
            }
            if sample.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "sample {} has non-finite features",
                    sample.name
                )));
            }
            match (expected, sample.true_label, sample.pseudo_label) {
                (Split::Train, Some(label), None) if label < classes.len() => {}
                (Split::Train, Some(label), None) => {
                    return Err(Error::Data(format!(
                        "sample {} has out-of-range label {label}",
                        sample.name
                    )))
                }
                (Split::Train, _, _) => {
                    return Err(Error::Data(format!(
                        "training sample {} must carry exactly a true label",
                        sample.name
                    )))
                }
                (Split::Test, None, None) => {}
                (Split::Test, _, _) => {
                    return Err(Error::Data(format!(
                        "test sample {} must be unlabeled at load time",
                        sample.name
                    )))
                }
            }
        }
        Ok(Dataset {
            train,
            test,
            classes,
            dim,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Sorted distinct date tokens across train and test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateSet(pub Vec<String>);

impl DateSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DateGroup {
    pub date: String,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Splits `date_sequence.ext` into its date token and sequence number.
///
/// The date is everything before the last underscore of the stem, so dates
/// that themselves contain underscores are accepted.
pub fn parse_sample_name(name: &str) -> Result<(String, u64)> {
    let malformed = |reason| Error::MalformedName {
        name: name.to_string(),
        reason,
    };
    let dot = name.rfind('.').ok_or_else(|| malformed("missing extension"))?;
    let (stem, ext) = (&name[..dot], &name[dot + 1..]);
    if ext.is_empty() {
        return Err(malformed("missing extension"));
    }
    let underscore = stem
        .rfind('_')
        .ok_or_else(|| malformed("no underscore separating date and sequence"))?;
    let (date, seq) = (&stem[..underscore], &stem[underscore + 1..]);
    if date.is_empty() {
        return Err(malformed("empty date"));
    }
    if seq.is_empty() || !seq.bytes().all(|b| b.is_ascii_digit()) {
        return Err(malformed("sequence is not a non-negative integer"));
    }
    let seq = seq
        .parse::<u64>()
        .map_err(|_| malformed("sequence is not a non-negative integer"))?;
    Ok((date.to_string(), seq))
}

/// Inverse of [`parse_sample_name`] for `.jpg` names with a four-digit
/// zero-padded sequence.
pub fn format_sample_name(date: &str, sequence: u64) -> String {
    format!("{date}_{sequence:04}.jpg")
}

pub fn derive_date_set(dataset: &Dataset) -> Result<DateSet> {
    let mut dates = BTreeSet::new();
    for sample in dataset.train.iter().chain(&dataset.test) {
        dates.insert(sample.date()?);
    }
    Ok(DateSet(dates.into_iter().collect()))
}

/// Groups train and test samples by date, in date-set order. Relative order
/// inside each group follows the input order.
pub fn partition_by_date(dataset: &Dataset) -> Result<Vec<DateGroup>> {
    let mut groups: BTreeMap<String, DateGroup> = BTreeMap::new();
    let mut place = |sample: &Sample, into_train: bool| -> Result<()> {
        let date = sample.date()?;
        let group = groups.entry(date.clone()).or_insert_with(|| DateGroup {
            date,
            train: Vec::new(),
            test: Vec::new(),
        });
        if into_train {
            group.train.push(sample.clone());
        } else {
            group.test.push(sample.clone());
        }
        Ok(())
    };
    for sample in &dataset.train {
        place(sample, true)?;
    }
    for sample in &dataset.test {
        place(sample, false)?;
    }
    Ok(groups.into_values().collect())
}

/// Seeded uniform draw of `n` validation samples without replacement.
/// Both halves keep the input order.
pub fn reserve_validation(
    train: &[Sample],
    n: usize,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    check_reserve_count(train.len(), n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked: BTreeSet<usize> = rand::seq::index::sample(&mut rng, train.len(), n)
        .into_iter()
        .collect();
    Ok(split_by_indices(train, &picked))
}

/// Like [`reserve_validation`] but allocates the draw across classes in
/// proportion to their frequency (largest-remainder rounding).
pub fn reserve_validation_stratified(
    train: &[Sample],
    n: usize,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    check_reserve_count(train.len(), n)?;
    let mut by_class: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, sample) in train.iter().enumerate() {
        by_class.entry(sample.target()).or_default().push(i);
    }
    let total = train.len() as f64;
    let mut quotas: Vec<(usize, f64)> = by_class
        .values()
        .map(|members| {
            let exact = n as f64 * members.len() as f64 / total;
            (exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut remaining = n - quotas.iter().map(|q| q.0).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.total_cmp(&quotas[a].1).then(a.cmp(&b)));
    for &class in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        let capacity = by_class.values().nth(class).map_or(0, Vec::len);
        if quotas[class].0 < capacity {
            quotas[class].0 += 1;
            remaining -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = BTreeSet::new();
    for (members, (quota, _)) in by_class.values().zip(&quotas) {
        for local in rand::seq::index::sample(&mut rng, members.len(), *quota) {
            picked.insert(members[local]);
        }
    }
    Ok(split_by_indices(train, &picked))
}

fn check_reserve_count(len: usize, n: usize) -> Result<()> {
    if n == 0 || n >= len {
        return Err(Error::InvalidCount {
            requested: n,
            constraint: format!("0 < n < {len}"),
        });
    }
    Ok(())
}

fn split_by_indices(train: &[Sample], picked: &BTreeSet<usize>) -> (Vec<Sample>, Vec<Sample>) {
    let (mut rest, mut validation) = (Vec::new(), Vec::new());
    for (i, sample) in train.iter().enumerate() {
        if picked.contains(&i) {
            validation.push(sample.clone());
        } else {
            rest.push(sample.clone());
        }
    }
    (rest, validation)
}
