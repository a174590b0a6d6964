//! One round of consensus pseudo-labeling on a single date group.

use deem::dataset::{generate_synthetic, partition_by_date, SyntheticConfig};
use deem::experts::{train_ensemble, ExpertSpec};
use deem::pseudolabel::{assign_pseudo_labels, LabelCase, DEFAULT_TOP_K};

fn main() -> deem::Result<()> {
    let data = generate_synthetic(&SyntheticConfig {
        class_sep: 2.0,
        ..Default::default()
    })?;
    let group = partition_by_date(&data.dataset)?.remove(0);
    let ensemble = train_ensemble(&ExpertSpec::default_ensemble(4), &group.train, data.dataset.num_classes())?;

    let round = assign_pseudo_labels(ensemble.experts(), &group.test, &group.train, DEFAULT_TOP_K)?;
    let batch = &round.batch;
    println!(
        "{}: case 1 {}, case 2 {}, abstained {}",
        group.date,
        batch.case1.len(),
        batch.case2.len(),
        batch.abstained.len()
    );

    let name_of = |id| group.test.iter().find(|s| s.id == id).map(|s| s.name.as_str()).unwrap_or("?");
    for entry in round.audit.iter().filter(|e| e.case != LabelCase::Unanimous).take(5) {
        let truth = data.truth[name_of(entry.sample_id)];
        println!(
            "{} top1={:?} pair={:?} votes={:?} -> {:?} (truth {truth})",
            name_of(entry.sample_id),
            entry.top1,
            entry.top2_set,
            entry.vote_histogram,
            entry.label
        );
    }
    Ok(())
}
