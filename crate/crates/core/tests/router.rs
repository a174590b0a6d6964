mod common;

use std::collections::BTreeMap;

use deem::dataset::{format_sample_name, generate_synthetic, partition_by_date, ClassTable, SyntheticConfig};
use deem::experts::{train_ensemble, ExpertFamily, ExpertSpec};
use deem::progressive::{run_to_completion, RunConfig};
use deem::router::{
    build_final_model, evaluate, infer, predict_samples, read_predictions, write_predictions, BranchedModel,
    ModelMetadata,
};
use deem::Error;

fn three_date_model() -> (BranchedModel, deem::dataset::GeneratedData) {
    let data = generate_synthetic(&SyntheticConfig {
        train_per_group: 60,
        test_per_group: 20,
        ..Default::default()
    })
    .unwrap();
    let config = RunConfig::default();
    let groups = partition_by_date(&data.dataset).unwrap();
    let finals: Vec<_> = groups
        .iter()
        .map(|g| (g.clone(), run_to_completion(g, &config, 7).unwrap().train))
        .collect();
    let model = build_final_model(&finals, &config.effective_specs(), &data.dataset.classes, ModelMetadata::default())
        .unwrap();
    (model, data)
}

#[test]
fn one_branch_per_date_and_dispatch_by_name() {
    let (model, data) = three_date_model();
    assert_eq!(model.dates().collect::<Vec<_>>(), vec!["synth0001", "synth0002", "synth0003"]);
    for sample in &data.dataset.test {
        let date = sample.date().unwrap();
        let direct = model.branch(&date).unwrap().predict(&sample.features).unwrap();
        assert_eq!(infer(&model, &sample.name, &sample.features).unwrap(), direct);
    }
}

#[test]
fn unknown_date_is_an_error() {
    let (model, data) = three_date_model();
    let features = &data.dataset.test[0].features;
    match infer(&model, "20990101_0001.jpg", features) {
        Err(Error::UnknownDate(date)) => assert_eq!(date, "20990101"),
        other => panic!("expected UnknownDate, got {other:?}"),
    }
    assert!(matches!(infer(&model, "nodate.jpg", features), Err(Error::MalformedName { .. })));
}

#[test]
fn unlabeled_test_samples_block_the_final_model() {
    let data = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let groups = partition_by_date(&data.dataset).unwrap();
    let finals: Vec<_> = groups.iter().map(|g| (g.clone(), g.train.clone())).collect();
    let err = build_final_model(
        &finals,
        &ExpertSpec::default_ensemble(4),
        &data.dataset.classes,
        ModelMetadata::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::UnlabeledTestSamples { count: 40, .. }), "{err}");
}

#[test]
fn single_branch_with_a_constant_label() {
    let train: Vec<_> = (0..12)
        .map(|i| common::train_sample(i, vec![i as f64, 1.0 - i as f64], 2))
        .collect();
    let ensemble = train_ensemble(&ExpertSpec::default_ensemble(4), &train, 3).unwrap();
    let model = BranchedModel::from_branches(
        BTreeMap::from([("20200314".to_string(), ensemble)]),
        ClassTable::numbered(3),
        ModelMetadata::default(),
    )
    .unwrap();
    for seq in 1..10 {
        let name = format_sample_name("20200314", seq);
        assert_eq!(infer(&model, &name, &[seq as f64 * 7.0, -3.0]).unwrap(), 2);
    }
}

#[test]
fn bundle_round_trip_and_branch_replacement() {
    let (mut model, data) = three_date_model();
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let loaded = BranchedModel::load(dir.path()).unwrap();
    assert_eq!(loaded, model);

    let before: Vec<_> = data.dataset.test.iter().map(|s| infer(&model, &s.name, &s.features).unwrap()).collect();
    let groups = partition_by_date(&data.dataset).unwrap();
    let replacement = train_ensemble(
        &[ExpertSpec::new(ExpertFamily::NearestCentroid, 0)],
        &groups[1].train,
        7,
    )
    .unwrap();
    model.replace_branch("synth0002", replacement).unwrap();
    for (sample, old) in data.dataset.test.iter().zip(before) {
        if sample.date().unwrap() != "synth0002" {
            assert_eq!(infer(&model, &sample.name, &sample.features).unwrap(), old);
        }
    }
}

#[test]
fn predictions_file_round_trip_and_evaluation() {
    let (model, data) = three_date_model();
    let predictions = predict_samples(&model, &data.dataset.test).unwrap();
    assert_eq!(predictions.len(), data.dataset.test.len());
    assert!(predictions.windows(2).all(|w| w[0].name < w[1].name));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("predictions.jsonl");
    write_predictions(&path, &predictions).unwrap();
    assert_eq!(read_predictions(&path).unwrap(), predictions);

    let triples: Vec<_> = data
        .dataset
        .test
        .iter()
        .map(|s| (s.name.as_str(), s.features.as_slice(), data.truth[&s.name]))
        .collect();
    let evaluation = evaluate(&model, &triples).unwrap();
    assert_eq!(evaluation.per_date.len(), 3);
    let mean = evaluation.per_date.values().map(|g| g.accuracy).sum::<f64>() / 3.0;
    assert_eq!(evaluation.average, mean);
    let correct: usize = evaluation.per_date.values().map(|g| g.correct).sum();
    assert_eq!(evaluation.micro, correct as f64 / triples.len() as f64);
}
