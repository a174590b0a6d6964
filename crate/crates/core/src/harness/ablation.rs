//! Seeded ablation experiments on held-out validation samples.
//!
//! Every repetition reserves a validation subset from the training data,
//! partitions both halves by date and scores each condition on the
//! validation samples of each date. Tables report seed-averaged accuracy;
//! comparisons report paired per-seed differences.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{mean, PairedComparison, RunReport, Table};
use crate::config::Config;
use crate::dataset::{
    generate_synthetic, reserve_validation, reserve_validation_stratified, Dataset, DateGroup, Sample, SampleId,
    Split, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::experts::train_ensemble;
use crate::progressive::{direct_vote_baseline, run_to_completion, RunConfig};

/// One date's share of a repetition.
#[derive(Clone, Debug)]
pub struct AblationGroup {
    pub date: String,
    pub train: Vec<Sample>,
    /// Validation samples with their true labels still attached.
    pub validation: Vec<Sample>,
}

impl AblationGroup {
    /// The validation samples as an unlabeled test split.
    pub fn unlabeled_validation(&self) -> Vec<Sample> {
        self.validation
            .iter()
            .map(|s| Sample {
                true_label: None,
                pseudo_label: None,
                split: Split::Test,
                ..s.clone()
            })
            .collect()
    }

    pub fn truth(&self) -> BTreeMap<SampleId, usize> {
        self.validation
            .iter()
            .map(|s| (s.id, s.true_label.expect("validation keeps its labels")))
            .collect()
    }

    /// Fraction of validation samples whose entry in `predicted` is correct.
    pub fn accuracy(&self, predicted: &BTreeMap<SampleId, usize>) -> f64 {
        let truth = self.truth();
        let correct = truth.iter().filter(|(id, t)| predicted.get(id) == Some(t)).count();
        correct as f64 / truth.len() as f64
    }
}

/// Data for repetition `rep`: the given dataset, or a fresh synthetic one
/// seeded with `generator.seed + rep`.
pub fn repetition_dataset(config: &Config, data: Option<&Dataset>, rep: usize) -> Result<Dataset> {
    match data {
        Some(d) => Ok(d.clone()),
        None if config.ablation.regenerate => {
            let generator = SyntheticConfig {
                seed: config.generator.seed.wrapping_add(rep as u64),
                ..config.generator.clone()
            };
            Ok(generate_synthetic(&generator)?.dataset)
        }
        None => Ok(generate_synthetic(&config.generator)?.dataset),
    }
}

/// Reserves validation samples and partitions train and validation by date.
pub fn prepare_groups(config: &Config, dataset: &Dataset, seed: u64) -> Result<Vec<AblationGroup>> {
    let n_train = dataset.train.len();
    if n_train < 2 {
        return Err(Error::Data("ablations need at least two training samples".into()));
    }
    let n_val = ((config.ablation.validation_fraction * n_train as f64).round() as usize).clamp(1, n_train - 1);
    let (rest, validation) = if config.ablation.stratified {
        reserve_validation_stratified(&dataset.train, n_val, seed)?
    } else {
        reserve_validation(&dataset.train, n_val, seed)?
    };
    let mut groups: BTreeMap<String, AblationGroup> = BTreeMap::new();
    for (sample, is_val) in rest.into_iter().map(|s| (s, false)).chain(validation.into_iter().map(|s| (s, true))) {
        let date = sample.date()?;
        let group = groups.entry(date.clone()).or_insert_with(|| AblationGroup {
            date,
            train: Vec::new(),
            validation: Vec::new(),
        });
        if is_val {
            group.validation.push(sample);
        } else {
            group.train.push(sample);
        }
    }
    for group in groups.values() {
        if group.train.is_empty() {
            return Err(Error::Data(format!(
                "date {} has validation samples but no training samples left",
                group.date
            )));
        }
    }
    Ok(groups.into_values().filter(|g| !g.validation.is_empty()).collect())
}

/// Per-group accuracies of each condition for one repetition.
type RepOutcome = (Vec<String>, Vec<Vec<f64>>);

fn run_repetitions<F>(config: &Config, data: Option<&Dataset>, body: F) -> Result<Vec<RepOutcome>>
where
    F: Fn(&[AblationGroup], &RunConfig, usize) -> Result<Vec<Vec<f64>>> + Sync,
{
    (0..config.ablation.seeds)
        .into_par_iter()
        .map(|rep| {
            let seed = config.seed.wrapping_add(rep as u64);
            let dataset = repetition_dataset(config, data, rep)?;
            let groups = prepare_groups(config, &dataset, seed)?;
            let run = RunConfig {
                seed,
                ..config.pipeline.clone()
            };
            let dates = groups.iter().map(|g| g.date.clone()).collect();
            Ok((dates, body(&groups, &run, dataset.num_classes())?))
        })
        .collect()
}

/// Turns repetition outcomes into a seed-averaged table plus paired
/// comparisons between the listed `(treatment, baseline)` row indices.
fn summarize(
    report: &mut RunReport,
    title: &str,
    labels: &[String],
    outcomes: &[RepOutcome],
    pairs: &[(usize, usize)],
) -> Result<()> {
    let columns = outcomes[0].0.clone();
    if outcomes.iter().any(|(dates, _)| *dates != columns) {
        return Err(Error::Data("repetitions produced different date groups".into()));
    }
    let mut table = Table::new(title, columns.clone());
    for (row, label) in labels.iter().enumerate() {
        let cells = (0..columns.len())
            .map(|g| 100.0 * mean(&outcomes.iter().map(|(_, acc)| acc[row][g]).collect::<Vec<_>>()))
            .collect();
        table.push_row(label.clone(), cells);
    }
    for &(treatment, baseline) in pairs {
        let per_seed = outcomes
            .iter()
            .map(|(_, acc)| 100.0 * (mean(&acc[treatment]) - mean(&acc[baseline])))
            .collect();
        report
            .comparisons
            .push(PairedComparison::new(&labels[treatment], &labels[baseline], per_seed));
    }
    report.tables.push(table);
    Ok(())
}

/// One model pooled over all dates versus one model per date.
pub fn ablate_split(config: &Config, data: Option<&Dataset>) -> Result<RunReport> {
    config.validate()?;
    let outcomes = run_repetitions(config, data, |groups, run, classes| {
        let specs = run.effective_specs();
        let pooled: Vec<Sample> = groups.iter().flat_map(|g| g.train.iter().cloned()).collect();
        let whole = train_ensemble(&specs, &pooled, classes)?;
        let mut whole_acc = Vec::new();
        let mut individual_acc = Vec::new();
        for group in groups {
            let validation = group.unlabeled_validation();
            whole_acc.push(group.accuracy(&direct_vote_baseline(&whole, &validation)?));
            let own = train_ensemble(&specs, &group.train, classes)?;
            individual_acc.push(group.accuracy(&direct_vote_baseline(&own, &validation)?));
        }
        Ok(vec![whole_acc, individual_acc])
    })?;
    let mut report = RunReport::new("ablate-split", config);
    let labels = ["Whole model".to_string(), "Individual model".to_string()];
    summarize(
        &mut report,
        "Top-1 accuracy (%) on validation: whole vs individual models",
        &labels,
        &outcomes,
        &[(1, 0)],
    )?;
    Ok(report)
}

/// Progressive pseudo-labeling accuracy on one group's validation samples.
pub fn progressive_accuracy(group: &AblationGroup, run: &RunConfig, classes: usize) -> Result<f64> {
    let date_group = DateGroup {
        date: group.date.clone(),
        train: group.train.clone(),
        test: group.unlabeled_validation(),
    };
    Ok(group.accuracy(&run_to_completion(&date_group, run, classes)?.labels))
}

/// Direct voting versus progressive learning on the validation samples.
pub fn ablate_progressive(config: &Config, data: Option<&Dataset>) -> Result<RunReport> {
    config.validate()?;
    let outcomes = run_repetitions(config, data, |groups, run, classes| {
        let specs = run.effective_specs();
        let mut dv = Vec::new();
        let mut pl = Vec::new();
        for group in groups {
            let ensemble = train_ensemble(&specs, &group.train, classes)?;
            dv.push(group.accuracy(&direct_vote_baseline(&ensemble, &group.unlabeled_validation())?));
            pl.push(progressive_accuracy(group, run, classes)?);
        }
        Ok(vec![dv, pl])
    })?;
    let mut report = RunReport::new("ablate-progressive", config);
    let labels = ["DV".to_string(), "PL".to_string()];
    summarize(
        &mut report,
        "Top-1 accuracy (%) on validation: direct voting vs progressive learning",
        &labels,
        &outcomes,
        &[(1, 0)],
    )?;
    Ok(report)
}

/// Progressive learning with the first `E` experts of the pool, for each
/// configured `E`.
pub fn ablate_experts(config: &Config, data: Option<&Dataset>) -> Result<RunReport> {
    config.validate()?;
    let counts = config.ablation.expert_counts.clone();
    let pool = config.ablation.expert_pool.clone();
    let outcomes = run_repetitions(config, data, |groups, run, classes| {
        counts
            .iter()
            .map(|&count| {
                let run = run.with_experts(pool[..count].to_vec());
                groups
                    .iter()
                    .map(|g| progressive_accuracy(g, &run, classes))
                    .collect::<Result<Vec<_>>>()
            })
            .collect()
    })?;
    let mut report = RunReport::new("ablate-experts", config);
    let labels: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
    let pairs: Vec<(usize, usize)> = (1..counts.len()).map(|i| (i, i - 1)).collect();
    summarize(
        &mut report,
        "Top-1 accuracy (%) with different number of experts",
        &labels,
        &outcomes,
        &pairs,
    )?;
    Ok(report)
}
