//! Progressive self-training over one date group.
//!
//! Each round labels what the consensus rules allow, folds those samples
//! into the training set with their pseudo-labels, and retrains every
//! expert from scratch. A round that labels nothing falls back to labeling
//! the single most confident sample, so every round makes progress.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{DateGroup, Sample, SampleId};
use crate::error::{Error, Result};
use crate::experts::{argmax_lowest, plurality_top1, train_ensemble, Ensemble, ExpertSpec};
use crate::pseudolabel::{assign_pseudo_labels, AuditEntry, LabelCase, PredictionRecord, DEFAULT_TOP_K};

/// What to do when a round assigns no labels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    /// Label the sample with the highest mean max-probability by plurality.
    #[default]
    HighestConfidence,
    /// Leave the round empty; a stalled group then hits `max_rounds`.
    Disabled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experts: Vec<ExpertSpec>,
    pub top_k: usize,
    pub max_rounds: usize,
    pub fallback: FallbackPolicy,
    /// Default `input_noise` for experts that do not set their own.
    pub expert_noise: f64,
    /// Mixed into every expert seed.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experts: ExpertSpec::default_ensemble(4),
            top_k: DEFAULT_TOP_K,
            max_rounds: 10_000,
            fallback: FallbackPolicy::HighestConfidence,
            expert_noise: 0.0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.experts.is_empty() {
            return Err(Error::Config("at least one expert spec is required".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be >= 1".into()));
        }
        if !(self.expert_noise >= 0.0 && self.expert_noise.is_finite()) {
            return Err(Error::Config("expert_noise must be >= 0".into()));
        }
        self.effective_specs().iter().try_for_each(ExpertSpec::validate)
    }

    /// Expert specs with the run seed folded into each expert's own seed and
    /// `expert_noise` applied where no `input_noise` is set.
    pub fn effective_specs(&self) -> Vec<ExpertSpec> {
        self.experts
            .iter()
            .map(|spec| {
                let mut spec = ExpertSpec {
                    seed: spec.seed ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
                    ..spec.clone()
                };
                if self.expert_noise > 0.0 && !spec.params.contains_key("input_noise") {
                    spec.params.insert("input_noise".into(), self.expert_noise);
                }
                spec
            })
            .collect()
    }

    pub fn with_experts(&self, experts: Vec<ExpertSpec>) -> Self {
        RunConfig {
            experts,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub case1: usize,
    pub case2: usize,
    pub abstained: usize,
    pub fallback: bool,
    /// Samples incorporated this round (case1 + case2, or 1 on fallback).
    pub labeled: usize,
    pub remaining: usize,
}

#[derive(Clone, Debug)]
pub struct RoundState {
    pub round_index: usize,
    pub train_current: Vec<Sample>,
    pub unlabeled: Vec<Sample>,
    pub ensemble: Ensemble,
    pub history: Vec<RoundSummary>,
    pub num_classes: usize,
}

impl RoundState {
    /// Trains the initial ensemble on the group's labeled samples.
    pub fn initial(group: &DateGroup, config: &RunConfig, num_classes: usize) -> Result<Self> {
        config.validate()?;
        if group.train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let ensemble = train_ensemble(&config.effective_specs(), &group.train, num_classes)?;
        Ok(RoundState {
            round_index: 0,
            train_current: group.train.clone(),
            unlabeled: group.test.clone(),
            ensemble,
            history: Vec::new(),
            num_classes,
        })
    }
}

/// Picks the most confident record (highest mean max-probability, ties to
/// the lower sample id) and labels it by plurality Top-1 vote.
fn fallback_choice(records: &[PredictionRecord], num_classes: usize) -> Option<(SampleId, usize)> {
    let best = records.iter().reduce(|best, r| {
        let (a, b) = (r.mean_max_prob(), best.mean_max_prob());
        if a > b || (a == b && r.sample_id < best.sample_id) {
            r
        } else {
            best
        }
    })?;
    let mut votes = vec![0usize; num_classes];
    for &label in &best.top1 {
        votes[label] += 1;
    }
    Some((best.sample_id, argmax_lowest(&votes)))
}

/// Chooses one sample to force-label when a round stalls.
pub fn force_label_fallback(state: &RoundState) -> Result<(SampleId, usize)> {
    let records = state
        .unlabeled
        .iter()
        .map(|s| PredictionRecord::build(state.ensemble.experts(), s))
        .collect::<Result<Vec<_>>>()?;
    fallback_choice(&records, state.num_classes)
        .ok_or_else(|| Error::Data("fallback requested with no unlabeled samples".into()))
}

/// One label-incorporate-retrain step. Returns the new state and the
/// round's audit entries.
pub fn run_round(state: RoundState, config: &RunConfig) -> Result<(RoundState, Vec<AuditEntry>)> {
    if state.unlabeled.is_empty() {
        return Err(Error::Data("run_round called with nothing left to label".into()));
    }
    let round = assign_pseudo_labels(
        state.ensemble.experts(),
        &state.unlabeled,
        &state.train_current,
        config.top_k,
    )?;
    let mut audit = round.audit;
    let mut labels: BTreeMap<SampleId, usize> = round.batch.labeled().copied().collect();
    let mut fallback = false;
    if labels.is_empty() && config.fallback == FallbackPolicy::HighestConfidence {
        if let Some((id, label)) = fallback_choice(&round.records, state.num_classes) {
            labels.insert(id, label);
            fallback = true;
            if let Some(entry) = audit.iter_mut().find(|e| e.sample_id == id) {
                entry.case = LabelCase::Fallback;
                entry.label = Some(label);
            }
            log::info!("round {}: fallback labeled sample {id} as {label}", state.round_index + 1);
        }
    }

    let RoundState {
        round_index,
        mut train_current,
        unlabeled,
        ensemble,
        mut history,
        num_classes,
    } = state;
    let mut still_unlabeled = Vec::with_capacity(unlabeled.len());
    let mut incorporated: Vec<Sample> = Vec::new();
    for mut sample in unlabeled {
        match labels.get(&sample.id) {
            Some(&label) => {
                sample.pseudo_label = Some(label);
                incorporated.push(sample);
            }
            None => still_unlabeled.push(sample),
        }
    }
    incorporated.sort_by_key(|s| s.id);
    train_current.extend(incorporated);

    let ensemble = if labels.is_empty() {
        ensemble
    } else {
        train_ensemble(&config.effective_specs(), &train_current, num_classes)?
    };
    history.push(RoundSummary {
        round: round_index + 1,
        case1: round.batch.case1.len(),
        case2: round.batch.case2.len(),
        abstained: round.batch.abstained.len(),
        fallback,
        labeled: labels.len(),
        remaining: still_unlabeled.len(),
    });
    Ok((
        RoundState {
            round_index: round_index + 1,
            train_current,
            unlabeled: still_unlabeled,
            ensemble,
            history,
            num_classes,
        },
        audit,
    ))
}

/// Result of labeling one group to completion.
#[derive(Clone, Debug)]
pub struct Completion {
    /// Original training samples followed by pseudo-labeled test samples in
    /// incorporation order.
    pub train: Vec<Sample>,
    pub labels: BTreeMap<SampleId, usize>,
    pub history: Vec<RoundSummary>,
    pub audit: Vec<Vec<AuditEntry>>,
}

impl Completion {
    pub fn rounds(&self) -> usize {
        self.history.len()
    }

    pub fn fallbacks(&self) -> usize {
        self.history.iter().filter(|h| h.fallback).count()
    }
}

/// Repeats [`run_round`] until every test sample in the group is labeled.
pub fn run_to_completion(group: &DateGroup, config: &RunConfig, num_classes: usize) -> Result<Completion> {
    config.validate()?;
    if group.train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if group.test.is_empty() {
        return Ok(Completion {
            train: group.train.clone(),
            labels: BTreeMap::new(),
            history: Vec::new(),
            audit: Vec::new(),
        });
    }
    let mut state = RoundState::initial(group, config, num_classes)?;
    let mut audit = Vec::new();
    while !state.unlabeled.is_empty() {
        if state.round_index >= config.max_rounds {
            return Err(Error::MaxRoundsExceeded {
                date: group.date.clone(),
                rounds: state.round_index,
                remaining: state.unlabeled.len(),
            });
        }
        let (next, entries) = run_round(state, config)?;
        audit.push(entries);
        state = next;
    }
    let test_ids: BTreeSet<SampleId> = group.test.iter().map(|s| s.id).collect();
    let labels = state
        .train_current
        .iter()
        .filter(|s| test_ids.contains(&s.id))
        .map(|s| (s.id, s.pseudo_label.expect("incorporated samples carry a pseudo-label")))
        .collect();
    Ok(Completion {
        train: state.train_current,
        labels,
        history: state.history,
        audit,
    })
}

/// One-shot plurality over expert Top-1 votes; no retraining.
pub fn direct_vote_baseline(ensemble: &Ensemble, unlabeled: &[Sample]) -> Result<BTreeMap<SampleId, usize>> {
    unlabeled
        .iter()
        .map(|s| Ok((s.id, plurality_top1(ensemble.experts(), &s.features)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::ProbabilityDistribution;

    fn rec(id: u32, dists: &[&[f64]]) -> PredictionRecord {
        PredictionRecord::from_distributions(
            SampleId(id),
            dists
                .iter()
                .map(|d| ProbabilityDistribution::new(d.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn fallback_picks_most_confident() {
        let records = vec![rec(0, &[&[0.6, 0.4]]), rec(1, &[&[0.1, 0.9]])];
        assert_eq!(fallback_choice(&records, 2), Some((SampleId(1), 1)));
    }

    #[test]
    fn fallback_breaks_confidence_ties_by_id() {
        let records = vec![rec(7, &[&[0.3, 0.7]]), rec(2, &[&[0.7, 0.3]])];
        assert_eq!(fallback_choice(&records, 2), Some((SampleId(2), 0)));
    }

    #[test]
    fn fallback_single_sample_and_plurality_tie() {
        let records = vec![rec(4, &[&[0.2, 0.8], &[0.9, 0.1]])];
        assert_eq!(fallback_choice(&records, 2), Some((SampleId(4), 0)));
        assert_eq!(fallback_choice(&[], 2), None);
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { max_rounds: 0, ..Default::default() }.validate().is_err());
        assert!(RunConfig { experts: vec![], ..Default::default() }.validate().is_err());
    }
}
