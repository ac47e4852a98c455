//! All four pipeline stages on synthetic data, writing the same artifacts as
//! the `hierids` binary.
//!
//!     cargo run --release --example end_to_end_pipeline [out_dir]

use std::path::PathBuf;

use hierids::dataset::{save_csv, synth_generate, Level, PlantedFeature, SynthSpec};
use hierids::pipeline::{
    cmd_ingest, cmd_select, cmd_simulate, cmd_train_eval, EvalMode, IngestConfig, SelectConfig, SimulateConfig,
    TrainEvalConfig,
};

fn main() -> hierids::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hierids-e2e"));
    std::fs::create_dir_all(&out).map_err(|e| hierids::Error::InvalidConfig(e.to_string()))?;
    let spec = SynthSpec {
        n_records: 1_500,
        n_features: 12,
        informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 1.0 }).collect(),
        class_mix: vec![1.0 / 6.0; 6],
    };
    let raw = out.join("raw.csv");
    save_csv(&synth_generate(&spec, 1)?, &raw)?;

    let summary = cmd_ingest(&IngestConfig {
        input: raw,
        out: out.clone(),
        ..IngestConfig::default()
    })?;
    print!("{}\n", summary.render());

    let data = out.join("dataset.csv");
    let select = SelectConfig {
        data: data.clone(),
        out: out.clone(),
        level: Level::Fine,
        max_runs: 15,
        boruta_trees: 30,
        search_trees: 20,
        attribution_trees: 20,
        cv_k: 5,
        ..SelectConfig::default()
    };
    print!("{}\n", cmd_select(&select)?.render(select.level));

    for mode in [EvalMode::Hier, EvalMode::Flat] {
        let cfg = TrainEvalConfig {
            data: data.clone(),
            out: out.clone(),
            mode,
            trees: Some(30),
            features_file: Some(out.join("subset.txt")),
            ..TrainEvalConfig::default()
        };
        print!("{}\n", cmd_train_eval(&cfg)?.summary);
    }

    let sim = SimulateConfig {
        out: out.clone(),
        model_bundle: Some(out.join("hier_model.json")),
        data: Some(data),
        sim: hierids::deploysim::SimConfig {
            duration_s: 60.0,
            n_features: spec.n_features,
            ..Default::default()
        },
        ..SimulateConfig::default()
    };
    print!("{}", cmd_simulate(&sim)?.render());
    println!("artifacts in {}", out.display());
    Ok(())
}
