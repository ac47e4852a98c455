//! Write a synthetic CAN-style CSV, ingest it with min-max scaling and print
//! the class table.
//!
//!     cargo run --example ingest_and_scale [out_dir]

use std::path::PathBuf;

use hierids::dataset::{cic_iov2024_mix, save_csv, synth_generate, PlantedFeature, SynthSpec};
use hierids::pipeline::{cmd_ingest, IngestConfig};

fn main() -> hierids::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hierids-ingest"));
    std::fs::create_dir_all(&out).map_err(|e| hierids::Error::InvalidConfig(e.to_string()))?;

    let spec = SynthSpec {
        n_records: 5_000,
        n_features: 16,
        informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 0.97 }).collect(),
        class_mix: cic_iov2024_mix(),
    };
    let ds = synth_generate(&spec, 7)?;
    let raw = out.join("raw.csv");
    save_csv(&ds, &raw)?;

    let cfg = IngestConfig {
        input: raw,
        out: out.join("ingested"),
        ..IngestConfig::default()
    };
    let summary = cmd_ingest(&cfg)?;
    print!("{}", summary.render());
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}
