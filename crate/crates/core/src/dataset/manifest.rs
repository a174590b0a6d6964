//! Line-delimited JSON manifest, sidecar truth file and class table.
//!
//! A data directory holds three files:
//!
//! * `manifest.jsonl`: one `{"name", "split", "label", "features"}` record per
//!   sample. `label` is a class name or `null`.
//! * `truth.jsonl`: optional `{"name", "label"}` records for test samples,
//!   read only by evaluation code.
//! * `classes.txt`: one class name per line; line index is the class id.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassTable, Dataset, Sample, SampleId, Split};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const CLASS_TABLE_FILE: &str = "classes.txt";

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    name: String,
    split: Split,
    label: Option<String>,
    features: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    name: String,
    label: String,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json_line<T: Serialize>(out: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    let line = serde_json::to_string(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        line: 0,
        source: e,
    })?;
    writeln!(out, "{line}").map_err(|e| Error::io(path, e))
}

fn read_json_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source: e,
        })?);
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = create(path)?;
    for sample in dataset.train.iter().chain(&dataset.test) {
        let label = sample
            .true_label
            .map(|c| dataset.classes.name(c).unwrap_or_default().to_string());
        let record = ManifestRecord {
            name: sample.name.clone(),
            split: sample.split,
            label,
            features: sample.features.clone(),
        };
        write_json_line(&mut out, path, &record)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a manifest; sample ids follow line order.
pub fn read_manifest(path: &Path, classes: &ClassTable) -> Result<Dataset> {
    let records: Vec<ManifestRecord> = read_json_lines(path)?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, record) in records.into_iter().enumerate() {
        let true_label = record
            .label
            .as_deref()
            .map(|name| {
                classes
                    .index_of(name)
                    .ok_or_else(|| Error::Data(format!("{}: unknown class {name:?}", record.name)))
            })
            .transpose()?;
        let sample = Sample {
            id: SampleId(i as u32),
            name: record.name,
            features: record.features,
            true_label,
            pseudo_label: None,
            split: record.split,
        };
        match sample.split {
            Split::Train => train.push(sample),
            Split::Test => test.push(sample),
        }
    }
    Dataset::new(train, test, classes.clone())
}

pub fn write_truth(path: &Path, truth: &BTreeMap<String, usize>, classes: &ClassTable) -> Result<()> {
    let mut out = create(path)?;
    for (name, &label) in truth {
        let record = TruthRecord {
            name: name.clone(),
            label: classes.name(label).unwrap_or_default().to_string(),
        };
        write_json_line(&mut out, path, &record)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth(path: &Path, classes: &ClassTable) -> Result<BTreeMap<String, usize>> {
    let records: Vec<TruthRecord> = read_json_lines(path)?;
    records
        .into_iter()
        .map(|r| {
            let label = classes
                .index_of(&r.label)
                .ok_or_else(|| Error::Data(format!("{}: unknown class {:?}", r.name, r.label)))?;
            Ok((r.name, label))
        })
        .collect()
}

pub fn write_class_table(path: &Path, classes: &ClassTable) -> Result<()> {
    let mut text = classes.names().join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_class_table(path: &Path) -> Result<ClassTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ClassTable::new(
        text.lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
    )
}

/// Writes manifest, class table and (when given) the sidecar truth file.
pub fn write_data_dir(
    dir: &Path,
    dataset: &Dataset,
    truth: Option<&BTreeMap<String, usize>>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_class_table(&dir.join(CLASS_TABLE_FILE), &dataset.classes)?;
    write_manifest(&dir.join(MANIFEST_FILE), dataset)?;
    if let Some(truth) = truth {
        write_truth(&dir.join(TRUTH_FILE), truth, &dataset.classes)?;
    }
    Ok(())
}

/// Loads a data directory. The truth map is `None` when no sidecar exists.
pub fn load_data_dir(dir: &Path) -> Result<(Dataset, Option<BTreeMap<String, usize>>)> {
    let classes = read_class_table(&dir.join(CLASS_TABLE_FILE))?;
    let dataset = read_manifest(&dir.join(MANIFEST_FILE), &classes)?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.exists() {
        Some(read_truth(&truth_path, &classes)?)
    } else {
        None
    };
    Ok((dataset, truth))
}
