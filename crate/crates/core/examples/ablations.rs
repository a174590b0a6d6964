//! The three ablations on freshly generated data: whole vs per-date models,
//! direct voting vs progressive learning, and 1..5 experts.
//!
//! cargo run --release --example ablations -- [seeds]

use deem::config::Config;
use deem::harness::{ablate_experts, ablate_progressive, ablate_split};

fn main() -> deem::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let mut config = Config::default();
    config.ablation.seeds = seeds;

    for run in [ablate_split, ablate_progressive, ablate_experts] {
        let report = run(&config, None)?;
        for table in &report.tables {
            println!("{}", table.render());
        }
        for c in &report.comparisons {
            println!("{} - {}: {:+.2} pts (se {:.2})", c.treatment, c.baseline, c.mean_diff, c.std_err);
        }
        println!();
    }
    Ok(())
}
