//! Command implementations behind the `deem` binary.
//!
//! Each command is an ordinary function so it can be driven from tests and
//! examples as well as from the command line. Output directories get a
//! `report.json` (machine-readable) and a `report.txt` (aligned tables).
//! Wall-clock timings go to a separate `timing.json` so the reports stay
//! byte-for-byte reproducible.

pub mod ablation;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use ablation::{ablate_experts, ablate_progressive, ablate_split};
pub use report::{GroupRow, PairedComparison, RunReport, Table, TableRow};

use crate::config::Config;
use crate::dataset::{
    derive_date_set, generate_synthetic, load_data_dir, partition_by_date, read_manifest, write_data_dir, Dataset,
};
use crate::error::{Error, Result};
use crate::progressive::{run_to_completion, Completion};
use crate::router::{
    accuracy_by_date, build_final_model, predict_samples, write_predictions, BranchedModel, Evaluation,
    ModelMetadata, Prediction,
};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const MODEL_DIR: &str = "model";
pub const AUDIT_DIR: &str = "audit";
pub const TIMING_FILE: &str = "timing.json";

/// Process exit code for an error: 2 configuration, 3 data/IO,
/// 4 unknown date at inference, 5 round cap exceeded, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::MalformedName { .. }
        | Error::Data(_)
        | Error::Io { .. }
        | Error::Json { .. }
        | Error::DimensionMismatch { .. }
        | Error::EmptyTrainingSet
        | Error::EmptyEvaluationSet
        | Error::InvalidCount { .. } => 3,
        Error::UnknownDate(_) => 4,
        Error::MaxRoundsExceeded { .. } => 5,
        _ => 1,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.json` and `report.txt` into `out`.
pub fn write_report(out: &Path, report: &RunReport) -> Result<()> {
    create_dir(out)?;
    write_file(&out.join(REPORT_JSON), &report.to_json())?;
    write_file(&out.join(REPORT_TEXT), &report.render())
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let path = if path.is_dir() { path.join(REPORT_JSON) } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        line: e.line(),
        path,
        source: e,
    })
}

#[derive(Debug, Serialize)]
struct Timing {
    phases: BTreeMap<String, f64>,
}

fn write_timing(out: &Path, phases: BTreeMap<String, f64>) -> Result<()> {
    let text = serde_json::to_string_pretty(&Timing { phases }).expect("timing serializes");
    write_file(&out.join(TIMING_FILE), &(text + "\n"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenSummary {
    pub dir: PathBuf,
    pub groups: Vec<(String, usize, usize)>,
    pub num_classes: usize,
    pub identical_groups: bool,
}

impl GenSummary {
    pub fn render(&self) -> String {
        let mut text = format!(
            "wrote {} ({} classes, {} groups)\n",
            self.dir.display(),
            self.num_classes,
            self.groups.len()
        );
        for (date, train, test) in &self.groups {
            text.push_str(&format!("  {date}: {train} train, {test} test\n"));
        }
        if self.identical_groups {
            text.push_str("  shift_scale = 0: all groups are identically distributed\n");
        }
        text
    }
}

/// Generates the synthetic dataset described by `config.generator` into
/// `out` (manifest, class table, sidecar truth).
pub fn gen_data(config: &Config, out: &Path) -> Result<GenSummary> {
    let data = generate_synthetic(&config.generator)?;
    write_data_dir(out, &data.dataset, Some(&data.truth))?;
    let groups = partition_by_date(&data.dataset)?
        .into_iter()
        .map(|g| (g.date, g.train.len(), g.test.len()))
        .collect();
    Ok(GenSummary {
        dir: out.to_path_buf(),
        groups,
        num_classes: data.dataset.num_classes(),
        identical_groups: config.generator.shift_scale == 0.0,
    })
}

/// Everything `run` produces, in memory.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub model: BranchedModel,
    pub predictions: Vec<Prediction>,
    pub completions: BTreeMap<String, Completion>,
}

/// The full pipeline on an in-memory dataset.
pub fn run_pipeline(config: &Config, dataset: &Dataset, truth: Option<&BTreeMap<String, usize>>) -> Result<RunOutput> {
    config.validate()?;
    let run = config.run_config();
    let classes = dataset.num_classes();
    let groups = partition_by_date(dataset)?;
    log::info!("{} date groups: {:?}", groups.len(), derive_date_set(dataset)?.0);

    let completions = groups
        .par_iter()
        .map(|g| run_to_completion(g, &run, classes))
        .collect::<Result<Vec<_>>>()?;

    let metadata = ModelMetadata {
        config_digest: config.digest(),
        rounds: groups
            .iter()
            .zip(&completions)
            .map(|(g, c)| (g.date.clone(), c.rounds()))
            .collect(),
    };
    let finals: Vec<_> = groups
        .iter()
        .cloned()
        .zip(completions.iter().map(|c| c.train.clone()))
        .collect();
    let model = build_final_model(&finals, &run.effective_specs(), &dataset.classes, metadata)?;
    let predictions = predict_samples(&model, &dataset.test)?;

    let mut report = RunReport::new("run", config);
    for (group, completion) in groups.iter().zip(&completions) {
        let (pseudo_label_accuracy, model_accuracy) = match truth {
            Some(truth) if !group.test.is_empty() => {
                let mut pl_correct = 0;
                let mut model_correct = 0;
                for sample in &group.test {
                    let expected = truth.get(&sample.name).copied();
                    pl_correct += usize::from(completion.labels.get(&sample.id).copied() == expected);
                    model_correct += usize::from(Some(model.branch(&group.date).unwrap().predict(&sample.features)?) == expected);
                }
                let n = group.test.len() as f64;
                (Some(pl_correct as f64 / n), Some(model_correct as f64 / n))
            }
            _ => (None, None),
        };
        report.groups.push(GroupRow {
            date: group.date.clone(),
            train: group.train.len(),
            test: group.test.len(),
            rounds: completion.rounds(),
            case1: completion.history.iter().map(|h| h.case1).sum(),
            case2: completion.history.iter().map(|h| h.case2).sum(),
            fallbacks: completion.fallbacks(),
            pseudo_label_accuracy,
            model_accuracy,
            history: completion.history.clone(),
        });
    }
    if let Some(truth) = truth {
        report.evaluation = evaluate_predictions(&predictions, truth, &dataset.classes).ok();
    }

    let completions = groups.into_iter().map(|g| g.date).zip(completions).collect();
    Ok(RunOutput {
        report,
        model,
        predictions,
        completions,
    })
}

/// Scores a predictions list against sidecar truth.
pub fn evaluate_predictions(
    predictions: &[Prediction],
    truth: &BTreeMap<String, usize>,
    classes: &crate::dataset::ClassTable,
) -> Result<Evaluation> {
    let scored = predictions
        .iter()
        .map(|p| {
            let expected = *truth
                .get(&p.name)
                .ok_or_else(|| Error::Data(format!("no ground truth for {}", p.name)))?;
            let predicted = classes
                .index_of(&p.predicted_label)
                .ok_or_else(|| Error::Data(format!("unknown class {:?}", p.predicted_label)))?;
            Ok((p.name.as_str(), predicted, expected))
        })
        .collect::<Result<Vec<_>>>()?;
    accuracy_by_date(scored)
}

/// Runs the pipeline on a data directory and writes report, model bundle,
/// predictions and per-round audit logs under `out`.
pub fn run(config: &Config, data: &Path, out: &Path) -> Result<RunReport> {
    let started = Instant::now();
    let (dataset, truth) = load_data_dir(data)?;
    let loaded = started.elapsed().as_secs_f64();
    let output = run_pipeline(config, &dataset, truth.as_ref())?;
    let pipeline = started.elapsed().as_secs_f64() - loaded;

    create_dir(out)?;
    output.model.save(&out.join(MODEL_DIR))?;
    write_predictions(&out.join(PREDICTIONS_FILE), &output.predictions)?;
    for (date, completion) in &output.completions {
        let dir = out.join(AUDIT_DIR).join(date);
        create_dir(&dir)?;
        for (round, entries) in completion.audit.iter().enumerate() {
            let path = dir.join(format!("round_{:04}.jsonl", round + 1));
            let mut text = Vec::new();
            for entry in entries {
                serde_json::to_writer(&mut text, entry).expect("audit entry serializes");
                text.push(b'\n');
            }
            let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            file.write_all(&text).map_err(|e| Error::io(&path, e))?;
        }
    }
    write_report(out, &output.report)?;
    write_timing(
        out,
        BTreeMap::from([("load".to_string(), loaded), ("pipeline".to_string(), pipeline)]),
    )?;
    Ok(output.report)
}

fn load_optional(data: Option<&Path>) -> Result<Option<Dataset>> {
    data.map(|d| load_data_dir(d).map(|(dataset, _)| dataset)).transpose()
}

/// Shared driver for the three ablation commands.
pub fn ablate(
    which: fn(&Config, Option<&Dataset>) -> Result<RunReport>,
    config: &Config,
    data: Option<&Path>,
    out: &Path,
) -> Result<RunReport> {
    let started = Instant::now();
    let dataset = load_optional(data)?;
    let report = which(config, dataset.as_ref())?;
    write_report(out, &report)?;
    write_timing(out, BTreeMap::from([("total".to_string(), started.elapsed().as_secs_f64())]))?;
    Ok(report)
}

/// Predicts every test sample of a manifest with a saved model bundle and
/// writes `{name, predicted_label}` lines sorted by name.
pub fn infer(model_dir: &Path, manifest: &Path, out: &Path) -> Result<Vec<Prediction>> {
    let model = BranchedModel::load(model_dir)?;
    let manifest = if manifest.is_dir() {
        manifest.join(crate::dataset::MANIFEST_FILE)
    } else {
        manifest.to_path_buf()
    };
    let dataset = read_manifest(&manifest, model.classes())?;
    let predictions = predict_samples(&model, &dataset.test)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_predictions(out, &predictions)?;
    Ok(predictions)
}
