//! Progressive pseudo-labeling of one group until every test sample has a
//! label, compared with a one-shot direct vote.

use deem::dataset::{generate_synthetic, partition_by_date, SyntheticConfig};
use deem::experts::train_ensemble;
use deem::progressive::{direct_vote_baseline, run_to_completion, RunConfig};

fn main() -> deem::Result<()> {
    let data = generate_synthetic(&SyntheticConfig {
        class_sep: 2.0,
        ..Default::default()
    })?;
    let classes = data.dataset.num_classes();
    let config = RunConfig::default();

    for group in partition_by_date(&data.dataset)? {
        let done = run_to_completion(&group, &config, classes)?;
        let ensemble = train_ensemble(&config.effective_specs(), &group.train, classes)?;
        let direct = direct_vote_baseline(&ensemble, &group.test)?;

        let score = |labels: &std::collections::BTreeMap<_, usize>| {
            let hits = group
                .test
                .iter()
                .filter(|s| labels.get(&s.id) == Some(&data.truth[&s.name]))
                .count();
            100.0 * hits as f64 / group.test.len() as f64
        };
        println!(
            "{}: {} rounds, {} fallbacks, progressive {:.1}%, direct vote {:.1}%",
            group.date,
            done.rounds(),
            done.fallbacks(),
            score(&done.labels),
            score(&direct)
        );
        for round in &done.history {
            println!(
                "  round {:>2}: case1 {:>3} case2 {:>3} abstained {:>3}{}",
                round.round,
                round.case1,
                round.case2,
                round.abstained,
                if round.fallback { " (fallback)" } else { "" }
            );
        }
    }
    Ok(())
}
