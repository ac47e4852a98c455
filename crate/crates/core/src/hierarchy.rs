//! The three-level cascade: benign/attack on the vehicle, benign/DoS/spoofing
//! on the roadside unit, six fine classes on the near-edge node.
//!
//! Each level is trained independently on the full training slice with its
//! labels coarsened to that level. At prediction time a record only travels
//! as deep as its verdicts require (routed mode), or through every level
//! (full-cascade mode).

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FoldAssignment, LabelHierarchy, Level, ScalerParams};
use crate::error::{Error, Result};
use crate::learners::{Classifier, LearnerSpec, Model, ModelDocument};
use crate::matrix::Matrix;
use crate::metrics::{confusion, cv_aggregate, metric_table, MetricTable};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMode {
    #[default]
    Routed,
    FullCascade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub learner: LearnerSpec,
    /// Feature names, in the order the level's model sees them.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierConfig {
    /// Root, category and fine level, in that order.
    pub levels: [LevelConfig; 3],
    #[serde(default)]
    pub routing: RoutingMode,
}

impl HierConfig {
    /// Same learner and features at every level.
    pub fn uniform(learner: LearnerSpec, features: Vec<String>) -> Self {
        let level = LevelConfig { learner, features };
        HierConfig {
            levels: [level.clone(), level.clone(), level],
            routing: RoutingMode::Routed,
        }
    }

    pub fn level(&self, level: Level) -> &LevelConfig {
        &self.levels[level.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelModel {
    pub level: Level,
    pub features: Vec<String>,
    /// Schema column of each model input.
    pub columns: Vec<usize>,
    pub document: ModelDocument,
}

impl LevelModel {
    fn project(&self, record: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|&j| record[j]).collect()
    }

    pub fn predict_record(&self, record: &[f64]) -> usize {
        crate::learners::argmax(&self.document.model.proba_row(&self.project(record)))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.document.model.predict(&x.select_cols(&self.columns))
    }
}

pub const HIER_FORMAT: &str = "hierids-hier-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierModel {
    pub format: String,
    pub version: u32,
    pub levels: Vec<LevelModel>,
    pub hierarchy: LabelHierarchy,
    /// Applied to raw records before routing, when present.
    pub scaler: Option<ScalerParams>,
    pub routing: RoutingMode,
    pub n_features: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl HierModel {
    pub fn level(&self, level: Level) -> &LevelModel {
        &self.levels[level.index()]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: HierModel = serde_json::from_str(s)?;
        if m.format != HIER_FORMAT || m.version != 1 || m.levels.len() != 3 {
            return Err(Error::InvalidConfig("not a hierarchical model bundle".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Vehicle,
    Rsu,
    NearEdge,
}

/// A final verdict at the granularity of the level that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalLabel {
    pub level: Level,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedDecision {
    pub level1: usize,
    pub level2: Option<usize>,
    pub level3: Option<usize>,
    pub final_label: FinalLabel,
    /// False when the fine verdict does not coarsen to the category verdict.
    pub consistent: bool,
    pub trace: Vec<Tier>,
}

/// Fine classes lying under `class` at `level`.
fn fine_under(h: &LabelHierarchy, level: Level, class: usize) -> Vec<usize> {
    (0..h.n_fine())
        .filter(|&f| h.coarsen(f, level).expect("fine id in range") == class)
        .collect()
}

impl FinalLabel {
    /// The fine class this verdict stands for, when it names exactly one.
    pub fn fine_class(&self, h: &LabelHierarchy) -> Option<usize> {
        match fine_under(h, self.level, self.class).as_slice() {
            [f] => Some(*f),
            _ => None,
        }
    }

    pub fn name<'a>(&self, h: &'a LabelHierarchy) -> &'a str {
        &h.classes(self.level)[self.class]
    }
}

pub fn train_hierarchy(ds: &Dataset, config: &HierConfig, train: &[usize]) -> Result<HierModel> {
    Ok(train_hierarchy_timed(ds, config, train, None)?.0)
}

/// `fold` perturbs each level's learner seed so that fold jobs draw
/// independent streams; `None` uses the configured seeds unchanged.
fn train_hierarchy_timed(
    ds: &Dataset,
    config: &HierConfig,
    train: &[usize],
    fold: Option<usize>,
) -> Result<(HierModel, [Duration; 3])> {
    if train.is_empty() {
        return Err(Error::EmptyInput("empty training slice".into()));
    }
    let h = ds.hierarchy();
    let mut warnings = Vec::new();
    let mut present = vec![false; h.n_fine()];
    train.iter().for_each(|&i| present[ds.labels()[i]] = true);
    for (c, _) in present.iter().enumerate().filter(|(_, &p)| !p) {
        warnings.push(format!("class {} absent from the training slice", h.classes(Level::Fine)[c]));
    }

    let x_train = ds.features().select_rows(train);
    let mut levels = Vec::with_capacity(3);
    let mut times = [Duration::ZERO; 3];
    for level in Level::ALL {
        let lc = config.level(level);
        if lc.features.is_empty() {
            return Err(Error::InvalidConfig(format!("{level} has an empty feature subset")));
        }
        let columns = ds.schema().resolve(&lc.features)?;
        let y: Vec<usize> = train
            .iter()
            .map(|&i| h.coarsen(ds.labels()[i], level))
            .collect::<Result<_>>()?;
        let n_classes = h.n_classes(level);
        let mut seen = vec![false; n_classes];
        y.iter().for_each(|&c| seen[c] = true);
        if seen.iter().filter(|&&s| s).count() < 2 {
            warnings.push(format!("{level} sees a single class; its model is a constant"));
        }
        let learner = fold_learner(&lc.learner, fold);
        let x = x_train.select_cols(&columns);
        let start = Instant::now();
        let model = learner.fit(&x, &y, n_classes)?;
        times[level.index()] = start.elapsed();
        levels.push(LevelModel {
            level,
            features: lc.features.clone(),
            columns,
            document: ModelDocument::new(model.for_deployment()),
        });
    }
    Ok((
        HierModel {
            format: HIER_FORMAT.into(),
            version: 1,
            levels,
            hierarchy: h.clone(),
            scaler: None,
            routing: config.routing,
            n_features: ds.n_features(),
            warnings,
        },
        times,
    ))
}

fn fold_learner(learner: &LearnerSpec, fold: Option<usize>) -> LearnerSpec {
    match fold {
        Some(f) => learner.with_seed(seed::derive(learner.seed(), "fold", &[f as u64])),
        None => *learner,
    }
}

/// Route one record through the cascade according to `model.routing`.
pub fn predict_routed(model: &HierModel, record: &[f64]) -> Result<RoutedDecision> {
    if record.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: record.len(),
        });
    }
    let scaled;
    let record = match &model.scaler {
        Some(s) => {
            scaled = s.scale_record(record)?;
            &scaled[..]
        }
        None => record,
    };
    let p1 = model.level(Level::Root).predict_record(record);
    let (p2, p3) = match model.routing {
        RoutingMode::FullCascade => (
            Some(model.level(Level::Category).predict_record(record)),
            Some(model.level(Level::Fine).predict_record(record)),
        ),
        RoutingMode::Routed => (None, None),
    };
    Ok(decide(model, p1, |l| match l {
        Level::Category => p2.unwrap_or_else(|| model.level(Level::Category).predict_record(record)),
        _ => p3.unwrap_or_else(|| model.level(Level::Fine).predict_record(record)),
    }))
}

/// Turn level verdicts into a decision. `deeper` is asked only for the levels
/// the routing actually reaches.
fn decide(model: &HierModel, p1: usize, mut deeper: impl FnMut(Level) -> usize) -> RoutedDecision {
    let h = &model.hierarchy;
    if model.routing == RoutingMode::FullCascade {
        let (p2, p3) = (deeper(Level::Category), deeper(Level::Fine));
        return RoutedDecision {
            level1: p1,
            level2: Some(p2),
            level3: Some(p3),
            final_label: FinalLabel {
                level: Level::Fine,
                class: p3,
            },
            consistent: h.coarsen(p3, Level::Category).expect("fine id") == p2,
            trace: vec![Tier::Vehicle, Tier::Rsu, Tier::NearEdge],
        };
    }
    let root = FinalLabel {
        level: Level::Root,
        class: p1,
    };
    if fine_under(h, Level::Root, p1).len() == 1 {
        return RoutedDecision {
            level1: p1,
            level2: None,
            level3: None,
            final_label: root,
            consistent: true,
            trace: vec![Tier::Vehicle],
        };
    }
    let p2 = deeper(Level::Category);
    if fine_under(h, Level::Category, p2).len() == 1 {
        return RoutedDecision {
            level1: p1,
            level2: Some(p2),
            level3: None,
            final_label: FinalLabel {
                level: Level::Category,
                class: p2,
            },
            consistent: true,
            trace: vec![Tier::Vehicle, Tier::Rsu],
        };
    }
    let p3 = deeper(Level::Fine);
    RoutedDecision {
        level1: p1,
        level2: Some(p2),
        level3: Some(p3),
        final_label: FinalLabel {
            level: Level::Fine,
            class: p3,
        },
        consistent: h.coarsen(p3, Level::Category).expect("fine id") == p2,
        trace: vec![Tier::Vehicle, Tier::Rsu, Tier::NearEdge],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConsistencyStats {
    /// Records whose decision includes a fine-level verdict.
    pub reached_fine: usize,
    pub disagreements: usize,
    pub disagreement_rate: f64,
}

impl ConsistencyStats {
    fn from_decisions<'a>(decisions: impl IntoIterator<Item = &'a RoutedDecision>) -> Self {
        let mut s = ConsistencyStats::default();
        for d in decisions {
            if d.level3.is_some() {
                s.reached_fine += 1;
                s.disagreements += usize::from(!d.consistent);
            }
        }
        s.disagreement_rate = if s.reached_fine == 0 {
            0.0
        } else {
            s.disagreements as f64 / s.reached_fine as f64
        };
        s
    }

    fn merge(parts: &[ConsistencyStats]) -> Self {
        let reached_fine = parts.iter().map(|p| p.reached_fine).sum();
        let disagreements = parts.iter().map(|p| p.disagreements).sum();
        ConsistencyStats {
            reached_fine,
            disagreements,
            disagreement_rate: if reached_fine == 0 {
                0.0
            } else {
                disagreements as f64 / reached_fine as f64
            },
        }
    }
}

/// Wall-clock accounting around model fitting and prediction only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub setting: String,
    /// Seconds per level, summed over folds; one entry for the flat setting.
    pub train_per_level_s: Vec<f64>,
    pub train_total_s: f64,
    pub test_total_s: f64,
    pub test_instances: usize,
    pub test_per_instance_s: f64,
}

impl TimingReport {
    pub fn new(setting: &str, train: Vec<Duration>, test: Duration, instances: usize) -> Self {
        let train_per_level_s: Vec<f64> = train.iter().map(Duration::as_secs_f64).collect();
        let test_total_s = test.as_secs_f64();
        TimingReport {
            setting: setting.into(),
            train_total_s: train_per_level_s.iter().sum(),
            train_per_level_s,
            test_total_s,
            test_instances: instances,
            test_per_instance_s: if instances == 0 { 0.0 } else { test_total_s / instances as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierEvaluation {
    /// Fold-averaged table per level, each on its own label granularity.
    pub levels: Vec<MetricTable>,
    /// `fold_tables[fold][level]`.
    pub fold_tables: Vec<Vec<MetricTable>>,
    /// End-to-end routed decisions scored against the six fine classes.
    pub routed: MetricTable,
    pub routed_consistency: ConsistencyStats,
    /// Full-cascade disagreement between the category and fine verdicts.
    pub cascade_consistency: ConsistencyStats,
    #[serde(skip)]
    pub timing: Option<TimingReport>,
}

fn check_folds(ds: &Dataset, folds: &FoldAssignment) -> Result<()> {
    if folds.k < 2 {
        return Err(Error::InvalidConfig("cross-validation needs k >= 2".into()));
    }
    if folds.fold_of.len() != ds.n_records() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_records(),
            actual: folds.fold_of.len(),
        });
    }
    Ok(())
}

pub fn evaluate_hierarchy(ds: &Dataset, config: &HierConfig, folds: &FoldAssignment) -> Result<HierEvaluation> {
    check_folds(ds, folds)?;
    let h = ds.hierarchy();
    let mut fold_tables = Vec::with_capacity(folds.k);
    let mut routed_tables = Vec::with_capacity(folds.k);
    let mut routed_stats = Vec::new();
    let mut cascade_stats = Vec::new();
    let mut train_time = vec![Duration::ZERO; 3];
    let mut test_time = Duration::ZERO;
    let mut instances = 0;

    for fold in 0..folds.k {
        let test = folds.test_indices(fold);
        if test.is_empty() {
            continue;
        }
        let (model, times) = train_hierarchy_timed(ds, config, &folds.train_indices(fold), Some(fold))?;
        for (acc, t) in train_time.iter_mut().zip(times) {
            *acc += t;
        }
        let x_test = ds.features().select_rows(&test);

        let start = Instant::now();
        let routed_model = HierModel {
            routing: RoutingMode::Routed,
            ..model.clone()
        };
        let decisions: Vec<RoutedDecision> = x_test
            .rows()
            .map(|r| predict_routed(&routed_model, r))
            .collect::<Result<_>>()?;
        test_time += start.elapsed();
        instances += test.len();

        let preds: Vec<Vec<usize>> = Level::ALL
            .iter()
            .map(|&l| model.level(l).predict_matrix(&x_test))
            .collect::<Result<_>>()?;
        let mut tables = Vec::with_capacity(3);
        for level in Level::ALL {
            let y: Vec<usize> = test
                .iter()
                .map(|&i| h.coarsen(ds.labels()[i], level))
                .collect::<Result<_>>()?;
            tables.push(metric_table(&confusion(&y, &preds[level.index()], h.classes(level))?));
        }
        fold_tables.push(tables);

        let y_fine: Vec<usize> = test.iter().map(|&i| ds.labels()[i]).collect();
        let routed_fine: Vec<usize> = decisions
            .iter()
            .map(|d| d.final_label.fine_class(h).expect("routed verdicts name one fine class"))
            .collect();
        routed_tables.push(metric_table(&confusion(&y_fine, &routed_fine, h.classes(Level::Fine))?));
        routed_stats.push(ConsistencyStats::from_decisions(&decisions));

        let cascade_model = HierModel {
            routing: RoutingMode::FullCascade,
            ..model
        };
        let cascade: Vec<RoutedDecision> = (0..test.len())
            .map(|i| {
                let (p2, p3) = (preds[1][i], preds[2][i]);
                decide(&cascade_model, preds[0][i], |l| if l == Level::Category { p2 } else { p3 })
            })
            .collect();
        cascade_stats.push(ConsistencyStats::from_decisions(&cascade));
    }

    let levels = (0..3)
        .map(|l| cv_aggregate(&fold_tables.iter().map(|t| t[l].clone()).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    Ok(HierEvaluation {
        levels,
        routed: cv_aggregate(&routed_tables)?,
        fold_tables,
        routed_consistency: ConsistencyStats::merge(&routed_stats),
        cascade_consistency: ConsistencyStats::merge(&cascade_stats),
        timing: Some(TimingReport::new("hierarchical", train_time, test_time, instances)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEvaluation {
    pub table: MetricTable,
    pub fold_tables: Vec<MetricTable>,
    #[serde(skip)]
    pub timing: Option<TimingReport>,
}

/// Stratified k-fold evaluation of one learner on one label vector.
/// Fold `f` trains with the learner seed derived from `("fold", f)`.
pub fn cross_validate(
    x: &Matrix,
    y: &[usize],
    classes: &[String],
    learner: &LearnerSpec,
    folds: &FoldAssignment,
) -> Result<CvEvaluation> {
    if folds.k < 2 {
        return Err(Error::InvalidConfig("cross-validation needs k >= 2".into()));
    }
    if y.len() != x.n_rows() || folds.fold_of.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len().min(folds.fold_of.len()),
        });
    }
    let mut fold_tables = Vec::with_capacity(folds.k);
    let (mut train_time, mut test_time, mut instances) = (Duration::ZERO, Duration::ZERO, 0);
    for fold in 0..folds.k {
        let test = folds.test_indices(fold);
        if test.is_empty() {
            continue;
        }
        let train = folds.train_indices(fold);
        let xt = x.select_rows(&train);
        let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let learner = fold_learner(learner, Some(fold));
        let start = Instant::now();
        let model: Model = learner.fit(&xt, &yt, classes.len())?;
        train_time += start.elapsed();
        let xs = x.select_rows(&test);
        let start = Instant::now();
        let pred = model.predict(&xs)?;
        test_time += start.elapsed();
        instances += test.len();
        let ys: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        fold_tables.push(metric_table(&confusion(&ys, &pred, classes)?));
    }
    Ok(CvEvaluation {
        table: cv_aggregate(&fold_tables)?,
        fold_tables,
        timing: Some(TimingReport::new("flat", vec![train_time], test_time, instances)),
    })
}

/// A single six-class model evaluated exactly like one hierarchy level.
pub fn flat_baseline(
    ds: &Dataset,
    learner: &LearnerSpec,
    features: &[String],
    folds: &FoldAssignment,
) -> Result<CvEvaluation> {
    check_folds(ds, folds)?;
    if features.is_empty() {
        return Err(Error::InvalidConfig("flat baseline needs at least one feature".into()));
    }
    let cols = ds.schema().resolve(features)?;
    cross_validate(
        &ds.features().select_cols(&cols),
        ds.labels(),
        ds.hierarchy().classes(Level::Fine),
        learner,
        folds,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{stratified_folds, synth_generate, PlantedFeature, SynthSpec};
    use crate::learners::{DecisionTree, ForestParams};

    fn separable(n: usize, seed: u64) -> Dataset {
        synth_generate(
            &SynthSpec {
                n_records: n,
                n_features: 8,
                informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 1.0 }).collect(),
                class_mix: vec![1.0 / 6.0; 6],
            },
            seed,
        )
        .unwrap()
    }

    fn names(ds: &Dataset) -> Vec<String> {
        ds.schema().feature_names.clone()
    }

    fn rf() -> LearnerSpec {
        LearnerSpec::Forest(ForestParams::random_forest().with_trees(15).with_seed(3))
    }

    /// A hand-built bundle whose levels are single-leaf trees.
    fn constant_model(p1: usize, p2: usize, p3: usize, routing: RoutingMode) -> HierModel {
        let h = LabelHierarchy::iov();
        let leaf = |k: usize, c: usize| {
            let mut d = vec![0.0; k];
            d[c] = 1.0;
            ModelDocument::new(Model::Tree(DecisionTree::leaf(d, 1)))
        };
        let levels = Level::ALL
            .iter()
            .zip([leaf(2, p1), leaf(3, p2), leaf(6, p3)])
            .map(|(&level, document)| LevelModel {
                level,
                features: vec!["F0".into()],
                columns: vec![0],
                document,
            })
            .collect();
        HierModel {
            format: HIER_FORMAT.into(),
            version: 1,
            levels,
            hierarchy: h,
            scaler: None,
            routing,
            n_features: 1,
            warnings: vec![],
        }
    }

    #[test]
    fn routing_rules() {
        let benign = predict_routed(&constant_model(0, 2, 3, RoutingMode::Routed), &[0.0]).unwrap();
        assert_eq!((benign.level2, benign.level3), (None, None));
        assert_eq!(benign.trace, vec![Tier::Vehicle]);
        assert_eq!(benign.final_label.fine_class(&LabelHierarchy::iov()), Some(0));

        let dos = predict_routed(&constant_model(1, 1, 3, RoutingMode::Routed), &[0.0]).unwrap();
        assert_eq!((dos.level2, dos.level3), (Some(1), None));
        assert_eq!(dos.trace, vec![Tier::Vehicle, Tier::Rsu]);

        let spoof = predict_routed(&constant_model(1, 2, 4, RoutingMode::Routed), &[0.0]).unwrap();
        assert_eq!(spoof.level3, Some(4));
        assert!(spoof.consistent);
        assert_eq!(spoof.trace.len(), 3);

        let clash = predict_routed(&constant_model(1, 2, 1, RoutingMode::Routed), &[0.0]).unwrap();
        assert!(!clash.consistent);
        assert_eq!(clash.final_label.name(&LabelHierarchy::iov()), "DOS");

        let full = predict_routed(&constant_model(0, 2, 3, RoutingMode::FullCascade), &[0.0]).unwrap();
        assert_eq!(full.level1, benign.level1);
        assert_eq!(full.final_label.class, 3);
        assert!(predict_routed(&constant_model(0, 0, 0, RoutingMode::Routed), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn trained_levels_have_expected_class_counts() {
        let ds = separable(300, 1);
        let cfg = HierConfig::uniform(rf(), names(&ds));
        let all: Vec<usize> = (0..ds.n_records()).collect();
        let m = train_hierarchy(&ds, &cfg, &all).unwrap();
        let counts: Vec<usize> = m.levels.iter().map(|l| l.document.model.n_classes()).collect();
        assert_eq!(counts, vec![2, 3, 6]);
        assert_eq!(train_hierarchy(&ds, &cfg, &all).unwrap(), m);
        let back = HierModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);

        // a DoS record goes vehicle -> RSU and stops there
        let dos = (0..ds.n_records()).find(|&i| ds.labels()[i] == 1).unwrap();
        let d = predict_routed(&m, ds.record(dos)).unwrap();
        assert_eq!(d.final_label.name(ds.hierarchy()), "DOS");
        assert_eq!(d.trace, vec![Tier::Vehicle, Tier::Rsu]);
    }

    #[test]
    fn single_class_slice_warns() {
        let ds = separable(120, 2);
        let benign: Vec<usize> = (0..ds.n_records()).filter(|&i| ds.labels()[i] == 0).collect();
        let m = train_hierarchy(&ds, &HierConfig::uniform(rf(), names(&ds)), &benign).unwrap();
        assert!(m.warnings.iter().any(|w| w.contains("single class")));
        assert!(train_hierarchy(&ds, &HierConfig::uniform(rf(), vec![]), &benign).is_err());
    }

    #[test]
    fn levels_match_flat_evaluation_on_coarse_labels() {
        let ds = synth_generate(
            &SynthSpec {
                n_records: 400,
                n_features: 6,
                informative: (0..6).map(|c| PlantedFeature { feature: c, class: c, bias: 0.8 }).collect(),
                class_mix: vec![1.0 / 6.0; 6],
            },
            4,
        )
        .unwrap();
        let folds = stratified_folds(&ds, 4, 4).unwrap();
        let cfg = HierConfig::uniform(rf(), names(&ds));
        let ev = evaluate_hierarchy(&ds, &cfg, &folds).unwrap();
        for level in Level::ALL {
            let flat = cross_validate(
                ds.features(),
                &ds.labels_at(level),
                ds.hierarchy().classes(level),
                &rf(),
                &folds,
            )
            .unwrap();
            assert_eq!(flat.table, ev.levels[level.index()]);
        }
        let s = ev.routed_consistency;
        assert!(s.disagreement_rate >= 0.0 && s.disagreements <= s.reached_fine);
    }

    #[test]
    fn separable_data_is_perfect_everywhere() {
        let ds = separable(600, 5);
        let folds = stratified_folds(&ds, 5, 5).unwrap();
        let ev = evaluate_hierarchy(&ds, &HierConfig::uniform(rf(), names(&ds)), &folds).unwrap();
        for t in ev.levels.iter().chain([&ev.routed]) {
            assert!(t.all_rounded_equal(100.0));
        }
        assert_eq!(ev.routed_consistency.disagreements, 0);
        let flat = flat_baseline(&ds, &rf(), &names(&ds), &folds).unwrap();
        assert!(flat.table.all_rounded_equal(100.0));
        assert_eq!(flat.timing.unwrap().setting, "flat");
        assert_eq!(ev.timing.unwrap().train_per_level_s.len(), 3);
    }
}
