//! One round of ensemble pseudo-labeling.
//!
//! Each unlabeled sample lands in exactly one of three buckets:
//!
//! 1. every expert's Top-1 label agrees: take it;
//! 2. otherwise, at least `E - 1` experts share the same unordered Top-2
//!    pair: the most frequent Top-1 label among those experts is a
//!    candidate, accepted only if the pooled labels of its cosine Top-k
//!    training neighbours (across all experts' embedding spaces) have that
//!    candidate as their unique plurality;
//! 3. anything else abstains until a later round.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Sample, SampleId};
use crate::error::{Error, Result};
use crate::experts::{top_labels, Expert, ProbabilityDistribution};

/// Default neighbourhood size for similarity confirmation.
pub const DEFAULT_TOP_K: usize = 10;

/// An unordered pair of class indices, stored ascending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassPair(pub usize, pub usize);

impl ClassPair {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            ClassPair(a, b)
        } else {
            ClassPair(b, a)
        }
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0 == class || self.1 == class
    }
}

/// Every expert's view of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub sample_id: SampleId,
    pub dists: Vec<ProbabilityDistribution>,
    pub top1: Vec<usize>,
    pub top2_sets: Vec<ClassPair>,
}

impl PredictionRecord {
    pub fn build<E: Expert>(experts: &[E], sample: &Sample) -> Result<Self> {
        let dists = experts
            .iter()
            .map(|e| e.predict_proba(&sample.features))
            .collect::<Result<Vec<_>>>()?;
        Self::from_distributions(sample.id, dists)
    }

    /// Single-class problems have no Top-2; their pair repeats the one class.
    pub fn from_distributions(sample_id: SampleId, dists: Vec<ProbabilityDistribution>) -> Result<Self> {
        let mut top1 = Vec::with_capacity(dists.len());
        let mut top2_sets = Vec::with_capacity(dists.len());
        for dist in &dists {
            let n = dist.num_classes().min(2);
            let top = top_labels(dist, n)?;
            top1.push(top[0]);
            top2_sets.push(ClassPair::new(top[0], *top.last().unwrap()));
        }
        Ok(PredictionRecord {
            sample_id,
            dists,
            top1,
            top2_sets,
        })
    }

    /// Mean over experts of each expert's largest class probability.
    pub fn mean_max_prob(&self) -> f64 {
        self.dists.iter().map(ProbabilityDistribution::max_prob).sum::<f64>() / self.dists.len() as f64
    }
}

/// `Some(label)` iff every Top-1 vote is the same label.
pub fn unanimous_vote(top1: &[usize]) -> Option<usize> {
    let (&first, rest) = top1.split_first()?;
    rest.iter().all(|&l| l == first).then_some(first)
}

/// The Top-2 pair shared by at least `E - 1` experts, if any. With two
/// experts both pairs can qualify; the lexicographically smaller pair (lower
/// minimum class, then lower maximum) wins.
pub fn consensus_pair(top2_sets: &[ClassPair]) -> Option<ClassPair> {
    let experts = top2_sets.len();
    if experts < 2 {
        return None;
    }
    let mut counts: BTreeMap<ClassPair, usize> = BTreeMap::new();
    for pair in top2_sets {
        *counts.entry(*pair).or_default() += 1;
    }
    counts
        .into_iter()
        .find(|&(_, count)| count >= experts - 1)
        .map(|(pair, _)| pair)
}

/// Case-2 candidate: the most frequent Top-1 label among the experts whose
/// Top-2 pair equals the consensus pair. Frequency ties go to the lower
/// class index. `None` for single-expert ensembles or when no pair has
/// `E - 1` support.
pub fn top2_consensus(record: &PredictionRecord) -> Option<usize> {
    let pair = consensus_pair(&record.top2_sets)?;
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for (&top1, set) in record.top1.iter().zip(&record.top2_sets) {
        if *set == pair {
            *freq.entry(top1).or_default() += 1;
        }
    }
    let best = freq.values().copied().max()?;
    freq.into_iter().find(|&(_, c)| c == best).map(|(label, _)| label)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The `k` training embeddings most cosine-similar to `query`, most similar
/// first; equal similarities go to the lower index.
///
/// A zero vector (query or training) is treated as orthogonal to everything,
/// i.e. similarity 0, so a degenerate embedding cannot abort a round.
pub fn topk_neighbors(query: &[f64], train_embeddings: &[Vec<f64>], k: usize) -> Result<Vec<(usize, f64)>> {
    if k > train_embeddings.len() {
        return Err(Error::KTooLarge {
            k,
            available: train_embeddings.len(),
        });
    }
    let query_norm = norm(query);
    let mut scored = Vec::with_capacity(train_embeddings.len());
    for (i, emb) in train_embeddings.iter().enumerate() {
        if emb.len() != query.len() {
            return Err(Error::DimensionMismatch {
                expected: query.len(),
                actual: emb.len(),
            });
        }
        let denom = query_norm * norm(emb);
        let sim = if denom == 0.0 {
            0.0
        } else {
            (dot(query, emb) / denom).clamp(-1.0, 1.0)
        };
        scored.push((i, sim));
    }
    // partial_cmp so that -0.0 and 0.0 tie; similarities are never NaN.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Training embeddings for every expert, computed once per round.
pub struct SimilarityIndex {
    embeddings: Vec<Vec<Vec<f64>>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl SimilarityIndex {
    pub fn build<E: Expert>(experts: &[E], train: &[Sample]) -> Result<Self> {
        let num_classes = experts
            .first()
            .map(Expert::num_classes)
            .ok_or_else(|| Error::Config("no experts".into()))?;
        let labels = train
            .iter()
            .map(|s| {
                s.target()
                    .ok_or_else(|| Error::Data(format!("training sample {} has no label", s.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let embeddings = experts
            .iter()
            .map(|e| train.iter().map(|s| e.embed(&s.features)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(SimilarityIndex {
            embeddings,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Histogram of neighbour labels pooled over all experts (`E * k` votes).
    pub fn pooled_votes<E: Expert>(&self, experts: &[E], features: &[f64], k: usize) -> Result<Vec<usize>> {
        let mut votes = vec![0usize; self.num_classes];
        for (expert, train_emb) in experts.iter().zip(&self.embeddings) {
            let query = expert.embed(features)?;
            for (i, _) in topk_neighbors(&query, train_emb, k)? {
                votes[self.labels[i]] += 1;
            }
        }
        Ok(votes)
    }
}

/// True iff `candidate` is the unique most frequent label in a vote
/// histogram. A tied maximum is not a confirmation.
pub fn unique_plurality_is(votes: &[usize], candidate: usize) -> bool {
    let best = votes.iter().copied().max().unwrap_or(0);
    best > 0 && votes.get(candidate) == Some(&best) && votes.iter().filter(|&&v| v == best).count() == 1
}

/// Checks a Case-2 candidate against the pooled labels of each expert's
/// cosine Top-k training neighbours.
pub fn similarity_confirm<E: Expert>(
    candidate: usize,
    sample: &Sample,
    experts: &[E],
    train: &[Sample],
    k: usize,
) -> Result<bool> {
    if k > train.len() {
        return Err(Error::KTooLarge {
            k,
            available: train.len(),
        });
    }
    let index = SimilarityIndex::build(experts, train)?;
    let votes = index.pooled_votes(experts, &sample.features, k)?;
    Ok(unique_plurality_is(&votes, candidate))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelCase {
    #[serde(rename = "1")]
    Unanimous,
    #[serde(rename = "2")]
    TopTwo,
    #[serde(rename = "abstain")]
    Abstain,
    /// Force-labeled by the round driver after a round with no labels.
    #[serde(rename = "fallback")]
    Fallback,
}

/// One line of the per-round audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub sample_id: SampleId,
    pub case: LabelCase,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<usize>,
    pub top1: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub top2_set: Option<ClassPair>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vote_histogram: Option<Vec<usize>>,
}

/// Labels assigned in one round, each list sorted by sample id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PseudoLabelBatch {
    pub case1: Vec<(SampleId, usize)>,
    pub case2: Vec<(SampleId, usize)>,
    pub abstained: Vec<SampleId>,
}

impl PseudoLabelBatch {
    pub fn labeled(&self) -> impl Iterator<Item = &(SampleId, usize)> {
        self.case1.iter().chain(&self.case2)
    }

    pub fn labeled_count(&self) -> usize {
        self.case1.len() + self.case2.len()
    }

    pub fn total(&self) -> usize {
        self.labeled_count() + self.abstained.len()
    }
}

/// A batch together with the per-sample evidence behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelingRound {
    pub batch: PseudoLabelBatch,
    pub audit: Vec<AuditEntry>,
    pub records: Vec<PredictionRecord>,
}

/// Routes one sample through the three cases.
fn classify<E: Expert>(
    experts: &[E],
    sample: &Sample,
    index: Option<&SimilarityIndex>,
    k: usize,
) -> Result<(PredictionRecord, AuditEntry)> {
    let record = PredictionRecord::build(experts, sample)?;
    let mut entry = AuditEntry {
        sample_id: sample.id,
        case: LabelCase::Abstain,
        label: None,
        top1: record.top1.clone(),
        top2_set: None,
        vote_histogram: None,
    };
    if let Some(label) = unanimous_vote(&record.top1) {
        entry.case = LabelCase::Unanimous;
        entry.label = Some(label);
    } else if let (Some(pair), Some(candidate)) = (consensus_pair(&record.top2_sets), top2_consensus(&record)) {
        entry.top2_set = Some(pair);
        if let Some(index) = index {
            let votes = index.pooled_votes(experts, &sample.features, k)?;
            if unique_plurality_is(&votes, candidate) {
                entry.case = LabelCase::TopTwo;
                entry.label = Some(candidate);
            }
            entry.vote_histogram = Some(votes);
        }
    }
    Ok((record, entry))
}

/// Runs the three-case rule over `unlabeled`.
///
/// `k` is clamped to the training-set size (with a warning). With an empty
/// training set Case 2 cannot be confirmed and such samples abstain.
pub fn assign_pseudo_labels<E: Expert>(
    experts: &[E],
    unlabeled: &[Sample],
    train: &[Sample],
    k: usize,
) -> Result<LabelingRound> {
    if experts.is_empty() {
        return Err(Error::Config("no experts".into()));
    }
    let k_eff = k.min(train.len());
    if k_eff < k {
        log::warn!("top-k clamped from {k} to the {} available training samples", train.len());
    }
    let index = if experts.len() >= 2 && k_eff > 0 {
        Some(SimilarityIndex::build(experts, train)?)
    } else {
        None
    };
    let mut results = unlabeled
        .par_iter()
        .map(|s| classify(experts, s, index.as_ref(), k_eff))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|(record, _)| record.sample_id);

    let mut batch = PseudoLabelBatch::default();
    for (_, entry) in &results {
        match (entry.case, entry.label) {
            (LabelCase::Unanimous, Some(l)) => batch.case1.push((entry.sample_id, l)),
            (LabelCase::TopTwo, Some(l)) => batch.case2.push((entry.sample_id, l)),
            _ => batch.abstained.push(entry.sample_id),
        }
    }
    let (records, audit) = results.into_iter().unzip();
    Ok(LabelingRound {
        batch,
        audit,
        records,
    })
}
