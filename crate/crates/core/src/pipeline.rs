//! The four stages behind the `hierids` binary: ingest, select, train-eval
//! and simulate.
//!
//! Every stage takes a fully resolved config (see [`resolve_config`]), writes
//! its artifacts under `out` and returns a human-readable summary. Each
//! artifact carries the resolved config: JSON files under a `run_config`
//! key, CSV and text files on a leading `# config: ...` line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::attribution::{attribution_report, guided_subset_search, AttributionReport, SearchConfig, SubsetSearchResult};
use crate::boruta::{boruta_run, BorutaConfig, FeatureStatus};
use crate::dataset::{
    load_csv, minmax_scale, read_header, stratified_folds, write_csv, Dataset, FeatureKind, FeatureSchema, Level,
    ScalerParams, BENIGN,
};
use crate::deploysim::{build_topology, mix_with_attack_rate, run_sim, sweep, sweep_csv, OverheadReport, SimClassifier, SimConfig, SweepRanges, TierTopology};
use crate::error::{Error, Result};
use crate::fedsim::{run_federation, FedConfig};
use crate::hierarchy::{
    evaluate_hierarchy, flat_baseline, train_hierarchy, HierConfig, HierModel, LevelConfig, RoutingMode, TimingReport,
};
use crate::learners::{fit_forest, ForestParams, LearnerSpec};
use crate::metrics::MetricTable;
use crate::seed;

pub const SEED_ENV: &str = "HIERIDS_SEED";
pub const DEFAULT_SEED: u64 = 42;

/// Layer `flags` over the JSON config file over `T::default()`. Objects merge
/// key by key; anything else is replaced. When neither layer names a `seed`,
/// it comes from `HIERIDS_SEED`, then [`DEFAULT_SEED`].
pub fn resolve_config<T>(file: Option<&Path>, flags: Value) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut merged = serde_json::to_value(T::default())?;
    let mut seed_given = false;
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let layer: Value = serde_json::from_str(&text)?;
        if !layer.is_object() {
            return Err(Error::InvalidConfig(format!("{} must hold a JSON object", path.display())));
        }
        seed_given |= layer.get("seed").is_some();
        merge(&mut merged, layer);
    }
    seed_given |= flags.get("seed").is_some();
    merge(&mut merged, flags);
    if !seed_given {
        let seed = match std::env::var(SEED_ENV) {
            Ok(raw) => raw
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}=`{raw}` is not an unsigned integer")))?,
            Err(_) => DEFAULT_SEED,
        };
        merged["seed"] = Value::from(seed);
    }
    serde_json::from_value(merged).map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn merge(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, l) => *b = l,
    }
}

/// Writes artifacts atomically (temp file, then rename) into one directory,
/// stamping each with the resolved config.
pub struct ArtifactWriter {
    dir: PathBuf,
    config: Value,
}

impl ArtifactWriter {
    pub fn new<C: Serialize>(dir: &Path, config: &C) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            config: serde_json::to_value(config)?,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(&self.stamped(payload)?)?;
        text.push('\n');
        self.write_raw(name, text.as_bytes())
    }

    /// Single-line JSON, for large model bundles.
    pub fn write_json_compact<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string(&self.stamped(payload)?)?;
        text.push('\n');
        self.write_raw(name, text.as_bytes())
    }

    fn stamped<T: Serialize>(&self, payload: &T) -> Result<Value> {
        let mut obj = Map::new();
        obj.insert("run_config".into(), self.config.clone());
        match serde_json::to_value(payload)? {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        Ok(Value::Object(obj))
    }

    /// CSV or plain text with a `# config:` first line.
    pub fn write_text(&self, name: &str, body: &str) -> Result<PathBuf> {
        let mut text = format!("# config: {}\n", serde_json::to_string(&self.config)?);
        text.push_str(body);
        self.write_raw(name, text.as_bytes())
    }

    pub fn write_raw(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let target = self.path(name);
        let tmp = self.dir.join(format!(".{name}.tmp-{}", std::process::id()));
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
        Ok(target)
    }
}

/// Read a JSON artifact, dropping the echoed `run_config`.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: Value = serde_json::from_str(&text)?;
    if let Value::Object(m) = &mut value {
        m.remove("run_config");
    }
    Ok(serde_json::from_value(value)?)
}

/// One name per line; blank lines and `#` lines are skipped.
pub fn read_feature_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    if names.is_empty() {
        return Err(Error::EmptyInput(format!("{} lists no features", path.display())));
    }
    Ok(names)
}

/// Load `dataset.csv` with the `schema.json` that sits next to it.
pub fn load_ingested(data: &Path) -> Result<Dataset> {
    let schema_path = data.with_file_name("schema.json");
    let schema: FeatureSchema = read_json(&schema_path)?;
    load_csv(data, &schema)
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidConfig(format!("{what} is required")));
    }
    Ok(())
}

/// Fixed-width rendering of a metric table, one row per class.
pub fn format_table(title: &str, t: &MetricTable) -> String {
    let mut s = format!("{title}\n{:<24}{:>10}{:>10}{:>10}{:>10}\n", "class", "precision", "recall", "f1", "support");
    for c in &t.per_class {
        let _ = writeln!(s, "{:<24}{:>10.2}{:>10.2}{:>10.2}{:>10}", c.class, c.precision, c.recall, c.f1, c.support);
    }
    let _ = writeln!(s, "{:<24}{:>10}{:>10}{:>10.2}{:>10}", "accuracy", "", "", t.accuracy, t.support);
    for (name, a) in [("macro avg", &t.macro_avg), ("weighted avg", &t.weighted_avg)] {
        let _ = writeln!(s, "{:<24}{:>10.2}{:>10.2}{:>10.2}{:>10}", name, a.precision, a.recall, a.f1, t.support);
    }
    s
}

/// Long format: `section,class,precision,recall,f1,support`, with `accuracy`,
/// `macro avg` and `weighted avg` rows closing each section.
pub fn metrics_long_csv(sections: &[(&str, &MetricTable)]) -> String {
    let mut s = String::from("section,class,precision,recall,f1,support\n");
    for (name, t) in sections {
        for c in &t.per_class {
            let _ = writeln!(s, "{name},{},{},{},{},{}", c.class, c.precision, c.recall, c.f1, c.support);
        }
        let _ = writeln!(s, "{name},accuracy,,,{},{}", t.accuracy, t.support);
        for (label, a) in [("macro avg", &t.macro_avg), ("weighted avg", &t.weighted_avg)] {
            let _ = writeln!(s, "{name},{label},{},{},{},{}", a.precision, a.recall, a.f1, t.support);
        }
    }
    s
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub input: PathBuf,
    /// A `FeatureSchema` JSON file; without one the schema comes from the header.
    pub schema: Option<PathBuf>,
    pub label_column: String,
    pub ignored_columns: Vec<String>,
    pub feature_kind: FeatureKind,
    pub scale: bool,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            input: PathBuf::new(),
            schema: None,
            label_column: "label".into(),
            ignored_columns: Vec::new(),
            feature_kind: FeatureKind::Binary,
            scale: true,
            out: PathBuf::from("out"),
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub n_records: usize,
    pub n_features: usize,
    pub classes: Vec<ClassCount>,
}

impl IngestSummary {
    pub fn of(ds: &Dataset) -> Self {
        let n = ds.n_records();
        let classes = ds
            .hierarchy()
            .classes(Level::Fine)
            .iter()
            .zip(ds.class_counts())
            .map(|(c, count)| ClassCount {
                class: c.clone(),
                count,
                percent: 100.0 * count as f64 / n as f64,
            })
            .collect();
        IngestSummary {
            n_records: n,
            n_features: ds.n_features(),
            classes,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,count,percent\n");
        for c in &self.classes {
            let _ = writeln!(s, "{},{},{}", c.class, c.count, c.percent);
        }
        let _ = writeln!(s, "total,{},100", self.n_records);
        s
    }

    pub fn render(&self) -> String {
        let mut s = format!("records: {}  features: {}\n", self.n_records, self.n_features);
        let _ = writeln!(s, "{:<24}{:>10}{:>10}", "class", "count", "%");
        for c in &self.classes {
            let _ = writeln!(s, "{:<24}{:>10}{:>10.2}", c.class, c.count, c.percent);
        }
        let _ = writeln!(s, "{:<24}{:>10}{:>10.2}", "total", self.n_records, 100.0);
        s
    }
}

/// Parse, optionally min-max scale, and write `dataset.csv`, `schema.json`,
/// `scaler.json` and `summary.csv`.
pub fn cmd_ingest(cfg: &IngestConfig) -> Result<IngestSummary> {
    require(&cfg.input, "input")?;
    let schema = match &cfg.schema {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let schema: FeatureSchema = serde_json::from_str(&text)?;
            schema.validate()?;
            schema
        }
        None => FeatureSchema::from_header(
            &read_header(&cfg.input)?,
            &cfg.label_column,
            &cfg.ignored_columns,
            cfg.feature_kind,
        )?,
    };
    let raw = load_csv(&cfg.input, &schema)?;
    let (ds, scaler) = if cfg.scale {
        minmax_scale(&raw)
    } else {
        let identity = ScalerParams::identity(raw.n_features());
        (raw, identity)
    };
    let summary = IngestSummary::of(&ds);

    let out = ArtifactWriter::new(&cfg.out, cfg)?;
    let mut body = Vec::new();
    write_csv(&ds, &mut body)?;
    out.write_text("dataset.csv", std::str::from_utf8(&body).expect("csv output is utf-8"))?;
    // scaled output is no longer guaranteed binary, and ignored columns were dropped
    let saved = FeatureSchema {
        feature_kind: if cfg.scale { FeatureKind::Real } else { schema.feature_kind },
        ignored_columns: Vec::new(),
        ..schema
    };
    out.write_json("schema.json", &saved)?;
    out.write_json("scaler.json", &scaler)?;
    out.write_text("summary.csv", &summary.to_csv())?;
    Ok(summary)
}

// ---------------------------------------------------------------- select

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    /// `dataset.csv` from ingest; `schema.json` must sit next to it.
    pub data: PathBuf,
    pub out: PathBuf,
    pub level: Level,
    pub max_runs: usize,
    pub alpha: f64,
    pub boruta_trees: usize,
    /// Largest subset the search may return; `None` allows every feature.
    pub budget: Option<usize>,
    pub cv_k: usize,
    pub search_trees: usize,
    pub epsilon: f64,
    pub patience: usize,
    pub slack: f64,
    pub attribution_trees: usize,
    /// Class whose signed attributions mark features to try last; defaults
    /// to the first non-benign class at `level`.
    pub attribution_target: Option<String>,
    /// Attributions are averaged over at most this many evenly spaced records.
    pub attribution_records: usize,
    pub seed: u64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            data: PathBuf::new(),
            out: PathBuf::from("out"),
            level: Level::Fine,
            max_runs: 100,
            alpha: 0.05,
            boruta_trees: 100,
            budget: None,
            cv_k: 10,
            search_trees: 100,
            epsilon: 0.05,
            patience: 3,
            slack: 0.0,
            attribution_trees: 50,
            attribution_target: None,
            attribution_records: 1000,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOutcome {
    pub confirmed: Vec<String>,
    pub ranking: Vec<String>,
    pub attribution: AttributionReport,
    pub search: SubsetSearchResult,
}

impl SelectOutcome {
    pub fn render(&self, level: Level) -> String {
        let mut s = format!("{level}: {} confirmed of {} ranked\n", self.confirmed.len(), self.ranking.len());
        let _ = writeln!(
            s,
            "subset ({} features, weighted F1 {:.2}, target {}): {}",
            self.search.selected.len(),
            self.search.trace.iter().find(|e| e.features == self.search.selected).map_or(f64::NAN, |e| e.weighted_f1),
            if self.search.reached_target { "reached" } else { "not reached" },
            self.search.selected_names.join(", ")
        );
        s
    }
}

fn evenly_spaced(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|i| i * n / cap).collect()
}

/// Boruta, ranking, path attributions and the guided subset search.
/// Writes `boruta.json`, `ranking.txt`, `attribution.json`, `subset.txt`,
/// `search_trace.csv` and `search.json`.
pub fn cmd_select(cfg: &SelectConfig) -> Result<SelectOutcome> {
    require(&cfg.data, "data")?;
    if cfg.boruta_trees == 0 || cfg.search_trees == 0 || cfg.attribution_trees == 0 {
        return Err(Error::InvalidConfig("tree counts must be at least 1".into()));
    }
    if cfg.attribution_records == 0 {
        return Err(Error::InvalidConfig("attribution_records must be at least 1".into()));
    }
    let ds = load_ingested(&cfg.data)?;
    let h = ds.hierarchy().clone();
    let labels = ds.labels_at(cfg.level);
    let names = ds.schema().feature_names.clone();
    let classes = h.classes(cfg.level).to_vec();
    let target = match &cfg.attribution_target {
        Some(name) => h.class_id(cfg.level, name).ok_or_else(|| Error::UnknownLabel(name.clone()))?,
        None => (0..classes.len()).find(|&c| classes[c] != BENIGN).unwrap_or(0),
    };
    let budget = cfg.budget.unwrap_or(names.len());
    if budget == 0 || budget > names.len() {
        return Err(Error::InvalidConfig(format!("budget must lie in 1..={}, got {budget}", names.len())));
    }

    let boruta_cfg = BorutaConfig {
        max_runs: cfg.max_runs,
        forest: ForestParams::random_forest().with_trees(cfg.boruta_trees),
        seed: seed::derive(cfg.seed, "select-boruta", &[]),
        alpha: cfg.alpha,
        resolve_tentative: true,
    };
    let boruta = boruta_run(&ds, &labels, &boruta_cfg)?;

    let forest = fit_forest(
        ds.features(),
        &labels,
        classes.len(),
        &ForestParams::random_forest()
            .with_trees(cfg.attribution_trees)
            .with_seed(seed::derive(cfg.seed, "select-attribution", &[])),
    )?;
    let rows = evenly_spaced(ds.n_records(), cfg.attribution_records);
    let attribution = attribution_report(&forest, &ds.features().select_rows(&rows), &names, &classes, target)?;

    let search_cfg = SearchConfig {
        learner: LearnerSpec::Forest(ForestParams::random_forest().with_trees(cfg.search_trees)),
        cv_k: cfg.cv_k,
        epsilon: cfg.epsilon,
        patience: cfg.patience,
        slack: cfg.slack,
        deprioritized: attribution.negative.clone(),
        seed: seed::derive(cfg.seed, "select-search", &[]),
    };
    let search = guided_subset_search(&boruta.ranking, &ds, cfg.level, budget, &search_cfg)?;

    let out = ArtifactWriter::new(&cfg.out, cfg)?;
    out.write_json("boruta.json", &boruta)?;
    out.write_text("ranking.txt", &boruta.ranking_text())?;
    out.write_json("attribution.json", &attribution)?;
    out.write_text("subset.txt", &(search.selected_names.join("\n") + "\n"))?;
    out.write_text("search_trace.csv", &search.trace_csv(&names))?;
    out.write_json("search.json", &search)?;

    Ok(SelectOutcome {
        confirmed: boruta.with_status(FeatureStatus::Confirmed).into_iter().map(|f| names[f].clone()).collect(),
        ranking: boruta.ranking.iter().map(|&f| names[f].clone()).collect(),
        attribution,
        search,
    })
}

// ---------------------------------------------------------------- train-eval

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Hier,
    Flat,
    Fed,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Hier => "hier",
            EvalMode::Flat => "flat",
            EvalMode::Fed => "fed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainEvalConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub mode: EvalMode,
    /// `rf`, `et`, `dt` or `lr`.
    pub learner: String,
    /// Overrides the tree count of forest learners.
    pub trees: Option<usize>,
    /// Ranked feature list; all schema features when absent.
    pub features_file: Option<PathBuf>,
    /// Prefix length of the feature list: one value for every level, or one
    /// per level (L1, L2, L3). The flat and federated modes use the last.
    pub top_k: Vec<usize>,
    pub k: usize,
    pub routing: RoutingMode,
    /// Label level of the federated run.
    pub fed_level: Level,
    pub fed: FedConfig,
    pub seed: u64,
}

impl Default for TrainEvalConfig {
    fn default() -> Self {
        TrainEvalConfig {
            data: PathBuf::new(),
            out: PathBuf::from("out"),
            mode: EvalMode::Hier,
            learner: "rf".into(),
            trees: None,
            features_file: None,
            top_k: Vec::new(),
            k: 10,
            routing: RoutingMode::Routed,
            fed_level: Level::Fine,
            fed: FedConfig::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl TrainEvalConfig {
    pub fn learner_spec(&self) -> Result<LearnerSpec> {
        let mut spec: LearnerSpec = self.learner.parse()?;
        if let (LearnerSpec::Forest(p), Some(t)) = (&mut spec, self.trees) {
            if t == 0 {
                return Err(Error::InvalidConfig("trees must be at least 1".into()));
            }
            *p = p.with_trees(t);
        }
        Ok(spec.with_seed(seed::derive(self.seed, "train-eval-learner", &[])))
    }

    /// Feature subsets for L1, L2 and L3.
    pub fn level_features(&self, ds: &Dataset) -> Result<[Vec<String>; 3]> {
        let list = match &self.features_file {
            Some(p) => read_feature_list(p)?,
            None => ds.schema().feature_names.clone(),
        };
        ds.schema().resolve(&list)?;
        let ks: [usize; 3] = match self.top_k.as_slice() {
            [] => [list.len(); 3],
            [k] => [*k; 3],
            [a, b, c] => [*a, *b, *c],
            other => {
                return Err(Error::InvalidConfig(format!(
                    "top_k takes one or three values, got {}",
                    other.len()
                )))
            }
        };
        let pick = |k: usize| {
            if k == 0 || k > list.len() {
                Err(Error::InvalidConfig(format!("top_k {k} outside 1..={}", list.len())))
            } else {
                Ok(list[..k].to_vec())
            }
        };
        Ok([pick(ks[0])?, pick(ks[1])?, pick(ks[2])?])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainEvalOutcome {
    pub mode: EvalMode,
    /// Section name and table, in output order.
    pub sections: Vec<(String, MetricTable)>,
    pub timing: TimingReport,
    pub summary: String,
}

/// Run one evaluation mode and write `metrics_<mode>.csv`,
/// `metrics_<mode>.json` and `timing_<mode>.json`. The hierarchical mode
/// also writes `hier_model.json` (trained on every record), the federated
/// mode `fedrun.json` and `fed_rounds.csv`.
pub fn cmd_train_eval(cfg: &TrainEvalConfig) -> Result<TrainEvalOutcome> {
    require(&cfg.data, "data")?;
    if cfg.k < 2 {
        return Err(Error::InvalidConfig("k must be at least 2".into()));
    }
    let learner = cfg.learner_spec()?;
    let ds = load_ingested(&cfg.data)?;
    let features = cfg.level_features(&ds)?;
    let out = ArtifactWriter::new(&cfg.out, cfg)?;
    let mode = cfg.mode.name();

    let (sections, timing, payload) = match cfg.mode {
        EvalMode::Hier => {
            let folds = stratified_folds(&ds, cfg.k, seed::derive(cfg.seed, "train-eval-folds", &[]))?;
            let [f1, f2, f3] = features;
            let hier = HierConfig {
                levels: [
                    LevelConfig { learner, features: f1 },
                    LevelConfig { learner, features: f2 },
                    LevelConfig { learner, features: f3 },
                ],
                routing: cfg.routing,
            };
            let eval = evaluate_hierarchy(&ds, &hier, &folds)?;
            let all: Vec<usize> = (0..ds.n_records()).collect();
            let mut model = train_hierarchy(&ds, &hier, &all)?;
            let scaler_path = cfg.data.with_file_name("scaler.json");
            if scaler_path.exists() {
                model.scaler = Some(read_json(&scaler_path)?);
            }
            out.write_json_compact("hier_model.json", &model)?;
            let mut sections: Vec<(String, MetricTable)> = Level::ALL
                .iter()
                .zip(&eval.levels)
                .map(|(l, t)| (format!("L{}", l.number()), t.clone()))
                .collect();
            sections.push(("routed".into(), eval.routed.clone()));
            let timing = eval.timing.clone().expect("evaluation records timing");
            (sections, timing, serde_json::to_value(&eval)?)
        }
        EvalMode::Flat => {
            let folds = stratified_folds(&ds, cfg.k, seed::derive(cfg.seed, "train-eval-folds", &[]))?;
            let eval = flat_baseline(&ds, &learner, &features[2], &folds)?;
            let timing = eval.timing.clone().expect("evaluation records timing");
            (vec![("flat".into(), eval.table.clone())], timing, serde_json::to_value(&eval)?)
        }
        EvalMode::Fed => {
            let fed = FedConfig {
                seed: seed::derive(cfg.seed, "train-eval-fed", &[]),
                ..cfg.fed.clone()
            };
            let level = cfg.fed_level;
            let fl_features = &features[level.index()];
            let start = Instant::now();
            let run = run_federation(&ds, level, fl_features, &fed)?;
            let elapsed = start.elapsed();
            let timing = TimingReport::new("federated", vec![elapsed], Default::default(), run.test_records);
            out.write_json("fedrun.json", &run)?;
            out.write_text("fed_rounds.csv", &run.rounds_csv())?;
            let section = format!("L{}", level.number());
            let table = run.final_metrics().clone();
            (vec![(section, table.clone())], timing, serde_json::json!({ "table": table }))
        }
    };

    let refs: Vec<(&str, &MetricTable)> = sections.iter().map(|(n, t)| (n.as_str(), t)).collect();
    out.write_text(&format!("metrics_{mode}.csv"), &metrics_long_csv(&refs))?;
    out.write_json(&format!("metrics_{mode}.json"), &payload)?;
    out.write_json(&format!("timing_{mode}.json"), &timing)?;

    let mut summary = String::new();
    for (name, t) in &sections {
        summary.push_str(&format_table(&format!("[{mode}] {name}"), t));
        summary.push('\n');
    }
    let _ = writeln!(
        summary,
        "train {:.3}s (per level: {}), test {:.3}s over {} instances ({:.3e}s each)",
        timing.train_total_s,
        timing.train_per_level_s.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join("/"),
        timing.test_total_s,
        timing.test_instances,
        timing.test_per_instance_s
    );
    Ok(TrainEvalOutcome {
        mode: cfg.mode,
        sections,
        timing,
        summary,
    })
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub out: PathBuf,
    pub sim: SimConfig,
    pub topology: TierTopology,
    /// Replaces `sim.attack_mix` with the benign/attack split scaled to this
    /// attack probability.
    pub stub_attack_rate: Option<f64>,
    /// `hier_model.json` from train-eval; records are drawn from `data`.
    pub model_bundle: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub sweep: Option<SweepRanges>,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            out: PathBuf::from("out"),
            sim: SimConfig::default(),
            topology: TierTopology::default(),
            stub_attack_rate: None,
            model_bundle: None,
            data: None,
            sweep: None,
            seed: DEFAULT_SEED,
        }
    }
}

/// Run the deployment simulation; writes `overhead.json`, `overhead.csv` and,
/// with a sweep, `sweep.csv`.
pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<OverheadReport> {
    let mut sim = SimConfig {
        seed: seed::derive(cfg.seed, "simulate", &[]),
        ..cfg.sim.clone()
    };
    if let Some(rate) = cfg.stub_attack_rate {
        if cfg.model_bundle.is_some() {
            return Err(Error::InvalidConfig("stub_attack_rate and model_bundle are exclusive".into()));
        }
        sim.attack_mix = mix_with_attack_rate(rate)?;
    }
    sim.validate()?;
    let state = build_topology(&sim, &cfg.topology)?;
    let report = match &cfg.model_bundle {
        Some(bundle) => {
            let text = fs::read_to_string(bundle).map_err(|e| Error::io(bundle, e))?;
            let mut model = HierModel::from_json(&text)?;
            // the ingested records are already scaled
            model.scaler = None;
            let data = cfg
                .data
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("model_bundle needs data".into()))?;
            let records = load_ingested(data)?;
            run_sim(&state, &SimClassifier::Model { model: &model, records: &records })?
        }
        None => run_sim(&state, &SimClassifier::Stub)?,
    };
    let out = ArtifactWriter::new(&cfg.out, cfg)?;
    out.write_json("overhead.json", &report)?;
    out.write_text("overhead.csv", &format!("{}\n{}\n", OverheadReport::CSV_HEADER, report.csv_row()))?;
    if let Some(ranges) = &cfg.sweep {
        out.write_text("sweep.csv", &sweep_csv(&sweep(&sim, &cfg.topology, ranges)?))?;
    }
    Ok(report)
}

impl OverheadReport {
    pub fn render(&self) -> String {
        format!(
            "vehicles {}  rsus {}  edges {}  packets {}\n\
             response-time overhead {:.4}%  per-vehicle memory {} KB\n\
             forwarded to RSU {:.4}  rsu {:.3} KB/s  edge {:.3} KB/s\n\
             model updates: {} pushes per node, {:.6} KB/s per vehicle\n",
            self.vehicles,
            self.rsus,
            self.edges,
            self.packets,
            self.response_time_overhead_pct,
            self.per_vehicle_memory_kb,
            self.forwarded_to_rsu_rate,
            self.rsu.kb_per_s,
            self.near_edge.kb_per_s,
            self.update_pushes_per_node,
            self.update_kb_per_s_per_vehicle
        )
    }
}
