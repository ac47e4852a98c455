//! Boruta on data with five planted features among twenty.
//!
//!     cargo run --example boruta_selection

use hierids::boruta::{boruta_run, BorutaConfig, FeatureStatus};
use hierids::dataset::{synth_generate, Level, PlantedFeature, SynthSpec};
use hierids::learners::ForestParams;

fn main() -> hierids::Result<()> {
    let spec = SynthSpec {
        n_records: 2_000,
        n_features: 20,
        informative: (0..5).map(|c| PlantedFeature { feature: c, class: c, bias: 0.95 }).collect(),
        class_mix: vec![1.0 / 6.0; 6],
    };
    let ds = synth_generate(&spec, 11)?;
    let config = BorutaConfig {
        max_runs: 50,
        forest: ForestParams::random_forest(),
        seed: 11,
        ..BorutaConfig::default()
    };
    let result = boruta_run(&ds, &ds.labels_at(Level::Fine), &config)?;

    println!("{} runs, final MZSA {:.3}", result.runs(), result.mzsa_history.last().copied().unwrap_or(f64::NAN));
    for status in [FeatureStatus::Confirmed, FeatureStatus::Tentative, FeatureStatus::Unimportant] {
        let names: Vec<&str> = result.with_status(status).iter().map(|&f| result.feature_names[f].as_str()).collect();
        println!("{status:?}: {}", names.join(" "));
    }
    println!("\nranking:");
    for (rank, &f) in result.ranking.iter().enumerate() {
        println!(
            "{:>3}  {:<4} {:>4} hits  median Z {:>8.3}  {:?}",
            rank + 1,
            result.feature_names[f],
            result.hits[f],
            result.median_z(f),
            result.status[f]
        );
    }
    Ok(())
}
