mod common;

use std::collections::BTreeMap;

use deem::dataset::{generate_synthetic, partition_by_date, DateGroup, SampleId, SyntheticConfig};
use deem::experts::{train_ensemble, Expert, ExpertSpec};
use deem::progressive::{
    direct_vote_baseline, run_round, run_to_completion, FallbackPolicy, RoundState, RunConfig,
};
use deem::pseudolabel::LabelCase;
use deem::Error;

fn first_group(config: SyntheticConfig) -> DateGroup {
    let data = generate_synthetic(&config).unwrap();
    partition_by_date(&data.dataset).unwrap().remove(0)
}

#[test]
fn separable_group_is_labeled_in_one_round() {
    let group = first_group(SyntheticConfig {
        num_groups: 1,
        class_sep: 20.0,
        noise_sd: 0.1,
        ..Default::default()
    });
    let done = run_to_completion(&group, &RunConfig::default(), 7).unwrap();
    assert_eq!(done.rounds(), 1);
    assert_eq!(done.history[0].case1, group.test.len());
    assert_eq!(done.labels.len(), group.test.len());
}

#[test]
fn labeled_total_grows_every_round_and_covers_the_test_split() {
    let group = first_group(SyntheticConfig {
        class_sep: 1.5,
        ..Default::default()
    });
    let done = run_to_completion(&group, &RunConfig::default(), 7).unwrap();
    let mut cumulative = 0;
    for round in &done.history {
        assert!(round.labeled >= 1);
        cumulative += round.labeled;
        assert_eq!(round.remaining, group.test.len() - cumulative);
    }
    assert_eq!(cumulative, group.test.len());
    assert!(done.rounds() <= group.test.len());
    // The original training samples stay first.
    assert_eq!(done.train.len(), group.train.len() + group.test.len());
    assert_eq!(&done.train[..group.train.len()], &group.train[..]);
}

/// Highest mean max-probability, ties to the lower id, labeled by the
/// plurality of Top-1 votes with ties to the lower class.
fn reference_fallback(state: &RoundState) -> (SampleId, usize) {
    let mut best: Option<(f64, SampleId, Vec<usize>)> = None;
    for sample in &state.unlabeled {
        let dists: Vec<_> = state
            .ensemble
            .experts()
            .iter()
            .map(|e| e.predict_proba(&sample.features).unwrap())
            .collect();
        let confidence = dists.iter().map(|d| d.max_prob()).sum::<f64>() / dists.len() as f64;
        let top1 = dists.iter().map(|d| common::reference_ranking(d.probs())[0]).collect();
        let better = match &best {
            None => true,
            Some((c, id, _)) => confidence > *c || (confidence == *c && sample.id < *id),
        };
        if better {
            best = Some((confidence, sample.id, top1));
        }
    }
    let (_, id, top1) = best.unwrap();
    let mut votes = vec![0; state.num_classes];
    for l in top1 {
        votes[l] += 1;
    }
    let top = *votes.iter().max().unwrap();
    (id, votes.iter().position(|&v| v == top).unwrap())
}

#[test]
fn stalled_rounds_fall_back_to_the_most_confident_sample() {
    let mut checked = 0;
    for seed in 0..40 {
        let group = first_group(SyntheticConfig {
            num_groups: 1,
            train_per_group: 14,
            test_per_group: 20,
            class_sep: 0.3,
            seed,
            ..Default::default()
        });
        let config = RunConfig {
            experts: ExpertSpec::default_ensemble(2),
            ..Default::default()
        };
        let mut state = RoundState::initial(&group, &config, 7).unwrap();
        while !state.unlabeled.is_empty() {
            let expected = reference_fallback(&state);
            let (next, audit) = run_round(state, &config).unwrap();
            let summary = next.history.last().unwrap();
            if summary.fallback {
                assert_eq!((summary.labeled, summary.case1, summary.case2), (1, 0, 0));
                let forced: Vec<_> = audit.iter().filter(|e| e.case == LabelCase::Fallback).collect();
                assert_eq!(forced.len(), 1);
                assert_eq!((forced[0].sample_id, forced[0].label.unwrap()), expected);
                let incorporated = next.train_current.last().unwrap();
                assert_eq!((incorporated.id, incorporated.pseudo_label), (expected.0, Some(expected.1)));
                checked += 1;
            }
            state = next;
        }
    }
    assert!(checked > 0, "no stalled round in the search range");
}

#[test]
fn disabled_fallback_hits_the_round_cap() {
    for seed in 0..40 {
        let group = first_group(SyntheticConfig {
            num_groups: 1,
            train_per_group: 14,
            test_per_group: 20,
            class_sep: 0.3,
            seed,
            ..Default::default()
        });
        let config = RunConfig {
            experts: ExpertSpec::default_ensemble(2),
            fallback: FallbackPolicy::Disabled,
            max_rounds: 25,
            ..Default::default()
        };
        if let Err(err) = run_to_completion(&group, &config, 7) {
            match err {
                Error::MaxRoundsExceeded { rounds, remaining, .. } => {
                    assert_eq!(rounds, 25);
                    assert!(remaining > 0);
                }
                other => panic!("unexpected error {other}"),
            }
            return;
        }
    }
    panic!("every seed finished without a fallback");
}

#[test]
fn empty_test_split_needs_no_rounds() {
    let mut group = first_group(SyntheticConfig::default());
    group.test.clear();
    let done = run_to_completion(&group, &RunConfig::default(), 7).unwrap();
    assert_eq!(done.rounds(), 0);
    assert!(done.labels.is_empty());
}

#[test]
fn direct_vote_matches_histogram_argmax() {
    let group = first_group(SyntheticConfig {
        class_sep: 1.0,
        ..Default::default()
    });
    let ensemble = train_ensemble(&ExpertSpec::default_ensemble(4), &group.train, 7).unwrap();
    let votes = direct_vote_baseline(&ensemble, &group.test).unwrap();
    let mut expected = BTreeMap::new();
    for sample in &group.test {
        let mut histogram = [0usize; 7];
        for expert in ensemble.experts() {
            let probs = expert.predict_proba(&sample.features).unwrap();
            histogram[common::reference_ranking(probs.probs())[0]] += 1;
        }
        let top = *histogram.iter().max().unwrap();
        expected.insert(sample.id, histogram.iter().position(|&v| v == top).unwrap());
    }
    assert_eq!(votes, expected);
}

#[test]
fn single_expert_labels_like_direct_voting() {
    for seed in 0..5 {
        let group = first_group(SyntheticConfig {
            class_sep: 1.0,
            seed,
            ..Default::default()
        });
        let config = RunConfig {
            experts: ExpertSpec::default_ensemble(1),
            ..Default::default()
        };
        let done = run_to_completion(&group, &config, 7).unwrap();
        assert_eq!(done.rounds(), 1);
        let ensemble = train_ensemble(&config.effective_specs(), &group.train, 7).unwrap();
        assert_eq!(done.labels, direct_vote_baseline(&ensemble, &group.test).unwrap());
    }
}

#[test]
fn noisy_runs_are_reproducible() {
    let group = first_group(SyntheticConfig {
        class_sep: 1.5,
        ..Default::default()
    });
    let config = RunConfig {
        expert_noise: 1.0,
        seed: 3,
        ..Default::default()
    };
    let a = run_to_completion(&group, &config, 7).unwrap();
    let b = run_to_completion(&group, &config, 7).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.history, b.history);
}
