//! Decision-path attributions of a forest: per-record additivity and the
//! dataset-level report.
//!
//!     cargo run --example path_attribution

use hierids::attribution::{attribution_report, path_contributions};
use hierids::dataset::{synth_generate, Level, PlantedFeature, SynthSpec};
use hierids::learners::{fit_forest, ForestParams};

fn main() -> hierids::Result<()> {
    let spec = SynthSpec {
        n_records: 3_000,
        n_features: 10,
        informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 0.9 }).collect(),
        class_mix: vec![1.0 / 6.0; 6],
    };
    let ds = synth_generate(&spec, 3)?;
    let classes = ds.hierarchy().classes(Level::Fine).to_vec();
    let forest = fit_forest(ds.features(), ds.labels(), classes.len(), &ForestParams::random_forest().with_trees(50).with_seed(3))?;

    let record = ds.record(0);
    let pc = path_contributions(&forest, record)?;
    let proba = forest.proba_row(record);
    println!("record 0 (true class {}):", classes[ds.labels()[0]]);
    println!("{:<16}{:>10}{:>12}{:>10}", "class", "bias", "bias+sum", "proba");
    for (c, (total, p)) in pc.reconstruct().iter().zip(&proba).enumerate() {
        println!("{:<16}{:>10.4}{:>12.6}{:>10.6}", classes[c], pc.bias[c], total, p);
    }

    let report = attribution_report(&forest, ds.features(), &ds.schema().feature_names, &classes, 1)?;
    println!("\n{} over {} records, target {}", report.method, report.n_records, classes[report.target_class]);
    for &j in report.order().iter() {
        println!(
            "{:<4} score {:.4}  signed toward target {:+.4}",
            report.feature_names[j],
            report.score[j],
            report.mean_signed.get(j, report.target_class)
        );
    }
    Ok(())
}
