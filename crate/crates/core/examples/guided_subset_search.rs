//! Turn a Boruta ranking into the smallest prefix-like subset that reaches
//! weighted-F1 100 at one level, printing the search trace.
//!
//!     cargo run --example guided_subset_search

use hierids::attribution::{guided_subset_search, SearchConfig};
use hierids::boruta::{boruta_run, BorutaConfig};
use hierids::dataset::{synth_generate, Level, PlantedFeature, SynthSpec};
use hierids::learners::{ForestParams, LearnerSpec};

fn main() -> hierids::Result<()> {
    let spec = SynthSpec {
        n_records: 1_200,
        n_features: 12,
        informative: (0..6).map(|c| PlantedFeature { feature: c + 2, class: c, bias: 1.0 }).collect(),
        class_mix: vec![1.0 / 6.0; 6],
    };
    let ds = synth_generate(&spec, 21)?;
    let level = Level::Fine;
    let boruta = boruta_run(
        &ds,
        &ds.labels_at(level),
        &BorutaConfig {
            max_runs: 20,
            forest: ForestParams::random_forest().with_trees(50),
            seed: 21,
            ..BorutaConfig::default()
        },
    )?;
    let config = SearchConfig {
        learner: LearnerSpec::Forest(ForestParams::random_forest().with_trees(20)),
        cv_k: 5,
        seed: 21,
        ..SearchConfig::default()
    };
    let result = guided_subset_search(&boruta.ranking, &ds, level, ds.n_features(), &config)?;
    print!("{}", result.trace_csv(&ds.schema().feature_names));
    println!(
        "selected {} (target {:.2} {})",
        result.selected_names.join(", "),
        result.target_f1,
        if result.reached_target { "reached" } else { "not reached" }
    );
    Ok(())
}
