use std::path::Path;

use hierids::dataset::{save_csv, synth_generate, Level, PlantedFeature, SynthSpec};
use hierids::pipeline::{
    cmd_ingest, cmd_select, cmd_train_eval, read_feature_list, EvalMode, IngestConfig, SelectConfig, TrainEvalConfig,
};

fn planted(n_records: usize, n_features: usize, bias: f64) -> SynthSpec {
    SynthSpec {
        n_records,
        n_features,
        informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias }).collect(),
        class_mix: vec![1.0 / 6.0; 6],
    }
}

fn ingest(dir: &Path, spec: &SynthSpec, seed: u64) -> std::path::PathBuf {
    let raw = dir.join("raw.csv");
    save_csv(&synth_generate(spec, seed).unwrap(), &raw).unwrap();
    cmd_ingest(&IngestConfig {
        input: raw,
        out: dir.to_path_buf(),
        ..IngestConfig::default()
    })
    .unwrap();
    dir.join("dataset.csv")
}

fn quick_select(dir: &Path, data: &Path) -> SelectConfig {
    SelectConfig {
        data: data.to_path_buf(),
        out: dir.to_path_buf(),
        max_runs: 30,
        boruta_trees: 50,
        search_trees: 20,
        attribution_trees: 20,
        cv_k: 3,
        ..SelectConfig::default()
    }
}

#[test]
fn select_at_level_one_confirms_the_attack_features() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest(dir.path(), &planted(1_500, 14, 0.95), 1);
    let out = cmd_select(&SelectConfig {
        level: Level::Root,
        ..quick_select(dir.path(), &data)
    })
    .unwrap();
    // feature 0 marks BENIGN, 1..6 mark the attack classes
    for f in 0..6 {
        assert!(out.confirmed.contains(&format!("F{f}")), "F{f} missing from {:?}", out.confirmed);
    }
    assert!(out.confirmed.len() <= 8, "{:?}", out.confirmed);
    assert_eq!(read_feature_list(&dir.path().join("ranking.txt")).unwrap(), out.ranking);
}

#[test]
fn budget_of_one_selects_exactly_one_feature() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest(dir.path(), &planted(600, 8, 0.95), 2);
    let out = cmd_select(&SelectConfig {
        budget: Some(1),
        max_runs: 10,
        ..quick_select(dir.path(), &data)
    })
    .unwrap();
    assert_eq!(out.search.selected.len(), 1);
    assert_eq!(read_feature_list(&dir.path().join("subset.txt")).unwrap().len(), 1);
}

#[test]
fn zero_budget_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest(dir.path(), &planted(300, 8, 0.95), 3);
    let err = cmd_select(&SelectConfig {
        budget: Some(0),
        ..quick_select(dir.path(), &data)
    })
    .unwrap_err();
    assert!(err.is_usage());
}

#[test]
fn federation_learns_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest(dir.path(), &planted(1_200, 8, 1.0), 4);
    let out = cmd_train_eval(&TrainEvalConfig {
        data,
        out: dir.path().to_path_buf(),
        mode: EvalMode::Fed,
        ..TrainEvalConfig::default()
    })
    .unwrap();
    let (_, table) = &out.sections[0];
    assert!(table.accuracy >= 99.0, "accuracy {}", table.accuracy);
    assert!(dir.path().join("fed_rounds.csv").exists());
}

#[test]
fn hierarchy_reports_every_level_and_writes_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest(dir.path(), &planted(900, 8, 1.0), 5);
    let out = cmd_train_eval(&TrainEvalConfig {
        data,
        out: dir.path().to_path_buf(),
        mode: EvalMode::Hier,
        trees: Some(20),
        k: 3,
        ..TrainEvalConfig::default()
    })
    .unwrap();
    let names: Vec<&str> = out.sections.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["L1", "L2", "L3", "routed"]);
    for (name, t) in &out.sections {
        assert!(t.all_rounded_equal(100.0), "{name}: {}", t.accuracy);
    }
    for f in ["metrics_hier.csv", "metrics_hier.json", "timing_hier.json", "hier_model.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn top_k_takes_one_or_three_values() {
    let dir = tempfile::tempdir().unwrap();
    let data = ingest(dir.path(), &planted(300, 8, 1.0), 6);
    let err = cmd_train_eval(&TrainEvalConfig {
        data,
        out: dir.path().to_path_buf(),
        top_k: vec![3, 4],
        ..TrainEvalConfig::default()
    });
    assert!(err.is_err());
}
