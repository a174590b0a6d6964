//! Reading an experiment config from TOML. Unset keys take their defaults;
//! the digest identifies the full resolved config in reports and bundles.

use deem::config::Config;

const TEXT: &str = r#"
seed = 7

[generator]
class_sep = 3.0
shift_scale = 6.0

[pipeline]
top_k = 5
expert_noise = 0.5

[[pipeline.experts]]
family = "nearest_centroid"
seed = 0

[[pipeline.experts]]
family = "knn"
seed = 1
params = { k = 9 }

[ablation]
seeds = 30
"#;

fn main() -> deem::Result<()> {
    let config = Config::from_toml(TEXT)?;
    println!("digest {}", config.digest());
    for spec in &config.run_config().effective_specs() {
        println!("{} seed {} params {:?}", spec.family, spec.seed, spec.params);
    }
    println!("\nresolved:\n{}", config.to_toml());

    let bad = Config::from_toml("[pipeline]\ntop_k = 0\n");
    println!("invalid config: {}", bad.unwrap_err());
    Ok(())
}
