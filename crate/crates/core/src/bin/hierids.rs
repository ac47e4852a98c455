use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{Map, Value};

use hierids::pipeline::{
    cmd_ingest, cmd_select, cmd_simulate, cmd_train_eval, resolve_config, IngestConfig, SelectConfig, SimulateConfig,
    TrainEvalConfig,
};
use hierids::Error;

#[derive(Parser)]
#[command(name = "hierids", version, about = "Hierarchical IoV intrusion detection pipeline")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (falls back to HIERIDS_SEED, then 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and scale a CSV, write dataset artifacts and print class counts.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        /// FeatureSchema JSON; otherwise derived from the header.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        label_column: Option<String>,
        /// Comma-separated columns to skip.
        #[arg(long, value_delimiter = ',')]
        ignore: Option<Vec<String>>,
        #[arg(long, value_parser = ["binary", "real"])]
        feature_kind: Option<String>,
        /// `on` or `off`.
        #[arg(long, value_parser = ["on", "off"])]
        scale: Option<String>,
    },
    /// Boruta selection, path attributions and guided subset search.
    Select {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        level: Option<u8>,
        #[arg(long)]
        max_runs: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        cv_k: Option<usize>,
        #[arg(long)]
        boruta_trees: Option<usize>,
        #[arg(long)]
        search_trees: Option<usize>,
    },
    /// Cross-validated evaluation of the hierarchy, flat baseline or federation.
    TrainEval {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_parser = ["hier", "flat", "fed"])]
        mode: Option<String>,
        #[arg(long)]
        learner: Option<String>,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        features_file: Option<PathBuf>,
        /// One prefix length, or three comma-separated (L1,L2,L3).
        #[arg(long, value_delimiter = ',')]
        top_k: Option<Vec<usize>>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_parser = ["routed", "full_cascade"])]
        routing: Option<String>,
    },
    /// Deployment overhead simulation.
    Simulate {
        #[arg(long)]
        stub_attack_rate: Option<f64>,
        #[arg(long)]
        model_bundle: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
    },
}

struct Flags(Map<String, Value>);

impl Flags {
    fn set<T: serde::Serialize>(&mut self, key: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.into(), serde_json::to_value(v).expect("flag values serialize"));
        }
        self
    }
}

fn run(cli: Cli) -> hierids::Result<()> {
    let mut flags = Flags(Map::new());
    flags.set("seed", cli.seed).set("out", cli.out);
    let file = cli.config.as_deref();
    match cli.command {
        Command::Ingest { input, schema, label_column, ignore, feature_kind, scale } => {
            flags
                .set("input", input)
                .set("schema", schema)
                .set("label_column", label_column)
                .set("ignored_columns", ignore)
                .set("feature_kind", feature_kind)
                .set("scale", scale.map(|s| s == "on"));
            let cfg: IngestConfig = resolve_config(file, Value::Object(flags.0))?;
            print!("{}", cmd_ingest(&cfg)?.render());
        }
        Command::Select { data, level, max_runs, budget, cv_k, boruta_trees, search_trees } => {
            flags
                .set("data", data)
                .set("level", level)
                .set("max_runs", max_runs)
                .set("budget", budget)
                .set("cv_k", cv_k)
                .set("boruta_trees", boruta_trees)
                .set("search_trees", search_trees);
            let cfg: SelectConfig = resolve_config(file, Value::Object(flags.0))?;
            print!("{}", cmd_select(&cfg)?.render(cfg.level));
        }
        Command::TrainEval { data, mode, learner, trees, features_file, top_k, k, routing } => {
            flags
                .set("data", data)
                .set("mode", mode)
                .set("learner", learner)
                .set("trees", trees)
                .set("features_file", features_file)
                .set("top_k", top_k)
                .set("k", k)
                .set("routing", routing);
            let cfg: TrainEvalConfig = resolve_config(file, Value::Object(flags.0))?;
            print!("{}", cmd_train_eval(&cfg)?.summary);
        }
        Command::Simulate { stub_attack_rate, model_bundle, data, duration } => {
            flags
                .set("stub_attack_rate", stub_attack_rate)
                .set("model_bundle", model_bundle)
                .set("data", data);
            if let Some(d) = duration {
                flags.0.insert("sim".into(), serde_json::json!({ "duration_s": d }));
            }
            let cfg: SimulateConfig = resolve_config(file, Value::Object(flags.0))?;
            print!("{}", cmd_simulate(&cfg)?.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_usage() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}
