//! Training and per-instance testing time of the cascade against a single
//! six-class model on the same folds.
//!
//!     cargo run --release --example flat_vs_hierarchy_timing

use hierids::dataset::{cic_iov2024_mix, stratified_folds, synth_generate, PlantedFeature, SynthSpec};
use hierids::hierarchy::{evaluate_hierarchy, flat_baseline, HierConfig, TimingReport};
use hierids::learners::{ForestParams, LearnerSpec};

fn show(t: &TimingReport) {
    let levels: Vec<String> = t.train_per_level_s.iter().map(|s| format!("{s:.3}")).collect();
    println!(
        "{:<14} train {:>7.3}s [{}]  test {:>7.3}s  per instance {:.2e}s",
        t.setting,
        t.train_total_s,
        levels.join(", "),
        t.test_total_s,
        t.test_per_instance_s
    );
}

fn main() -> hierids::Result<()> {
    let spec = SynthSpec {
        n_records: 10_000,
        n_features: 24,
        informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 0.98 }).collect(),
        class_mix: cic_iov2024_mix(),
    };
    let ds = synth_generate(&spec, 9)?;
    let names = ds.schema().feature_names.clone();
    let learner = LearnerSpec::Forest(ForestParams::random_forest().with_trees(50).with_seed(9));
    let folds = stratified_folds(&ds, 10, 9)?;

    let hier = evaluate_hierarchy(&ds, &HierConfig::uniform(learner, names.clone()), &folds)?;
    let flat = flat_baseline(&ds, &learner, &names, &folds)?;
    show(hier.timing.as_ref().expect("timed"));
    show(flat.timing.as_ref().expect("timed"));
    println!(
        "weighted F1: hierarchy L3 {:.2}, flat {:.2}",
        hier.levels[2].weighted_avg.f1, flat.table.weighted_avg.f1
    );
    Ok(())
}
