//! Full pipeline: pseudo-label every date, build one branch per date, save
//! the bundle, reload it and route new samples by the date in their name.

use deem::config::Config;
use deem::dataset::{format_sample_name, generate_synthetic};
use deem::harness::run_pipeline;
use deem::router::{infer, BranchedModel};
use deem::Error;

fn main() -> deem::Result<()> {
    let config = Config::default();
    let data = generate_synthetic(&config.generator)?;
    let output = run_pipeline(&config, &data.dataset, Some(&data.truth))?;
    print!("{}", output.report.render());

    let dir = std::env::temp_dir().join("deem-model");
    output.model.save(&dir)?;
    let model = BranchedModel::load(&dir)?;
    println!("\nbranches in {}: {:?}", dir.display(), model.dates().collect::<Vec<_>>());

    let sample = &data.dataset.test[0];
    let label = infer(&model, &sample.name, &sample.features)?;
    println!("{} -> {}", sample.name, model.classes().name(label).unwrap_or("?"));

    let stranger = format_sample_name("20991231", 1);
    match infer(&model, &stranger, &sample.features) {
        Err(Error::UnknownDate(date)) => println!("{stranger} -> no branch for date {date}"),
        other => println!("{stranger} -> {other:?}"),
    }
    Ok(())
}
