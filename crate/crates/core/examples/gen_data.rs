//! Writes a synthetic date-partitioned dataset to a directory.
//!
//! cargo run --example gen_data -- /tmp/deem-data

use std::path::PathBuf;

use deem::dataset::{partition_by_date, write_data_dir, generate_synthetic, SyntheticConfig};

fn main() -> deem::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("deem-data"));

    let config = SyntheticConfig {
        num_groups: 3,
        shift_scale: 8.0,
        ..Default::default()
    };
    let data = generate_synthetic(&config)?;
    write_data_dir(&out, &data.dataset, Some(&data.truth))?;

    println!("{} classes: {:?}", data.dataset.num_classes(), data.dataset.classes.names());
    for group in partition_by_date(&data.dataset)? {
        println!("{}: {} train, {} test", group.date, group.train.len(), group.test.len());
    }
    println!("wrote {}", out.display());
    Ok(())
}
