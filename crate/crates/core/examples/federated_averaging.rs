//! FedAvg over ten stratified clients against a centralized run with the
//! same model and budget.
//!
//!     cargo run --release --example federated_averaging

use hierids::dataset::{synth_generate, Level, PlantedFeature, SynthSpec};
use hierids::fedsim::{run_centralized, run_federation, FedConfig};

fn main() -> hierids::Result<()> {
    let spec = SynthSpec {
        n_records: 3_000,
        n_features: 10,
        informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 1.0 }).collect(),
        class_mix: vec![1.0 / 6.0; 6],
    };
    let ds = synth_generate(&spec, 13)?;
    let features = ds.schema().feature_names.clone();
    let config = FedConfig {
        local_epochs: 10,
        seed: 13,
        ..FedConfig::default()
    };
    let fed = run_federation(&ds, Level::Fine, &features, &config)?;
    print!("{}", fed.rounds_csv());
    let central = run_centralized(&ds, Level::Fine, &features, &config)?;
    println!(
        "final accuracy: federated {:.2}, centralized {:.2}",
        fed.final_metrics().accuracy,
        central.final_metrics().accuracy
    );
    Ok(())
}
