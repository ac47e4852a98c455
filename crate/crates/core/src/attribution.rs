//! Decision-path attribution on tree ensembles and the guided subset search.
//!
//! Walking a record from the root to its leaf, every split moves the node's
//! class distribution; that change is credited to the split feature. Summed
//! along the path and averaged over trees, the credits plus the root
//! distribution reproduce the forest's predicted probabilities exactly. This is
//! path attribution, not an exact Shapley value.

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_folds_for_labels, Dataset, Level};
use crate::error::{Error, Result};
use crate::hierarchy::cross_validate;
use crate::learners::{DecisionTree, ForestModel, LearnerSpec};
use crate::matrix::Matrix;

pub const METHOD: &str = "path attribution";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathContributions {
    /// Root class distribution averaged over trees.
    pub bias: Vec<f64>,
    /// `n_features × n_classes`.
    pub contributions: Matrix,
}

impl PathContributions {
    /// `bias + Σ contributions`, per class.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.bias.clone();
        for row in self.contributions.rows() {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }
}

fn accumulate_tree(tree: &DecisionTree, record: &[f64], bias: &mut [f64], contrib: &mut Matrix) {
    let nodes = tree.nodes();
    for (b, p) in bias.iter_mut().zip(&nodes[0].distribution) {
        *b += p;
    }
    let path = tree.path(record);
    for w in path.windows(2) {
        let (parent, child) = (&nodes[w[0]], &nodes[w[1]]);
        let feature = parent.split.expect("inner node on path").feature;
        for (k, (c, p)) in child.distribution.iter().zip(&parent.distribution).enumerate() {
            contrib.set(feature, k, contrib.get(feature, k) + (c - p));
        }
    }
}

pub fn tree_contributions(tree: &DecisionTree, record: &[f64]) -> Result<PathContributions> {
    check(record.len(), tree.n_features())?;
    let mut bias = vec![0.0; tree.n_classes()];
    let mut contributions = Matrix::zeros(tree.n_features(), tree.n_classes());
    accumulate_tree(tree, record, &mut bias, &mut contributions);
    Ok(PathContributions { bias, contributions })
}

pub fn path_contributions(model: &ForestModel, record: &[f64]) -> Result<PathContributions> {
    check(record.len(), model.n_features())?;
    let k = model.n_classes();
    let mut bias = vec![0.0; k];
    let mut contributions = Matrix::zeros(model.n_features(), k);
    for tree in model.trees() {
        accumulate_tree(tree, record, &mut bias, &mut contributions);
    }
    let t = model.trees().len() as f64;
    bias.iter_mut().for_each(|b| *b /= t);
    for i in 0..contributions.n_rows() {
        contributions.row_mut(i).iter_mut().for_each(|v| *v /= t);
    }
    Ok(PathContributions { bias, contributions })
}

fn check(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub method: String,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub target_class: usize,
    pub n_records: usize,
    /// `n_features × n_classes` mean signed contribution.
    pub mean_signed: Matrix,
    /// `n_features × n_classes` mean absolute contribution.
    pub mean_abs: Matrix,
    /// Mean absolute contribution averaged over classes.
    pub score: Vec<f64>,
    /// Features pushing the target class down on average.
    pub negative: Vec<usize>,
}

impl AttributionReport {
    /// Feature indices by descending global score, ties by index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.score.len()).collect();
        idx.sort_by(|&a, &b| self.score[b].total_cmp(&self.score[a]).then(a.cmp(&b)));
        idx
    }
}

pub fn attribution_report(
    model: &ForestModel,
    x: &Matrix,
    feature_names: &[String],
    class_names: &[String],
    target_class: usize,
) -> Result<AttributionReport> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput("attribution needs at least one record".into()));
    }
    check(feature_names.len(), model.n_features())?;
    check(class_names.len(), model.n_classes())?;
    if target_class >= model.n_classes() {
        return Err(Error::UnknownLabel(target_class.to_string()));
    }
    let (m, k) = (model.n_features(), model.n_classes());
    let mut signed = Matrix::zeros(m, k);
    let mut abs = Matrix::zeros(m, k);
    for row in x.rows() {
        let pc = path_contributions(model, row)?;
        for j in 0..m {
            for c in 0..k {
                let v = pc.contributions.get(j, c);
                signed.set(j, c, signed.get(j, c) + v);
                abs.set(j, c, abs.get(j, c) + v.abs());
            }
        }
    }
    let n = x.n_rows() as f64;
    for j in 0..m {
        signed.row_mut(j).iter_mut().for_each(|v| *v /= n);
        abs.row_mut(j).iter_mut().for_each(|v| *v /= n);
    }
    let score = (0..m).map(|j| abs.row(j).iter().sum::<f64>() / k as f64).collect();
    let negative = (0..m).filter(|&j| signed.get(j, target_class) < 0.0).collect();
    Ok(AttributionReport {
        method: METHOD.into(),
        feature_names: feature_names.to_vec(),
        class_names: class_names.to_vec(),
        target_class,
        n_records: x.n_rows(),
        mean_signed: signed,
        mean_abs: abs,
        score,
        negative,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub learner: LearnerSpec,
    pub cv_k: usize,
    /// Minimum weighted-F1 gain (percentage points) that counts as progress.
    pub epsilon: f64,
    /// Non-improving ranks tolerated before skipping ahead.
    pub patience: usize,
    /// Stop once weighted-F1 ≥ 100 − slack.
    pub slack: f64,
    /// Features probed last while skipping ahead (e.g. negatively attributed).
    pub deprioritized: Vec<usize>,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            learner: LearnerSpec::default(),
            cv_k: 10,
            epsilon: 0.05,
            patience: 3,
            slack: 0.0,
            deprioritized: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub features: Vec<usize>,
    pub weighted_f1: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSearchResult {
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub reached_target: bool,
    pub target_f1: f64,
    pub trace: Vec<TraceEntry>,
    /// Ranks (0-based positions in the ranking) passed over.
    pub skipped_ranks: Vec<usize>,
}

impl SubsetSearchResult {
    /// `set_size,features,weighted_f1,macro_f1`, features joined by `;`.
    pub fn trace_csv(&self, names: &[String]) -> String {
        let mut out = String::from("set_size,features,weighted_f1,macro_f1\n");
        for e in &self.trace {
            let f: Vec<&str> = e.features.iter().map(|&j| names[j].as_str()).collect();
            out.push_str(&format!(
                "{},{},{:.2},{:.2}\n",
                e.features.len(),
                f.join(";"),
                e.weighted_f1,
                e.macro_f1
            ));
        }
        out
    }
}

/// Grow a feature set along the ranking, scoring every candidate with
/// stratified k-fold weighted-F1 at `level`. After `patience` consecutive
/// extensions that gain less than `epsilon`, those ranks are dropped and
/// deeper ranks are tried one at a time on top of the last productive set
/// (deprioritized features last). Stops at the first set reaching the target
/// or when the set would exceed `budget`.
pub fn guided_subset_search(
    ranking: &[usize],
    ds: &Dataset,
    level: Level,
    budget: usize,
    config: &SearchConfig,
) -> Result<SubsetSearchResult> {
    if budget == 0 {
        return Err(Error::InvalidConfig("subset budget must be at least 1".into()));
    }
    if ranking.is_empty() {
        return Err(Error::EmptyInput("empty feature ranking".into()));
    }
    if budget > ranking.len() {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} exceeds the {} ranked features",
            ranking.len()
        )));
    }
    if let Some(&bad) = ranking.iter().find(|&&f| f >= ds.n_features()) {
        return Err(Error::DimensionMismatch {
            expected: ds.n_features(),
            actual: bad,
        });
    }
    let y = ds.labels_at(level);
    let classes = ds.hierarchy().classes(level);
    let folds = stratified_folds_for_labels(&y, config.cv_k, config.seed)?;
    let learner = config.learner.with_seed(config.seed);
    let target = 100.0 - config.slack;
    let mut trace = Vec::new();
    let mut evaluate = |set: &[usize]| -> Result<f64> {
        let ev = cross_validate(&ds.features().select_cols(set), &y, classes, &learner, &folds)?;
        trace.push(TraceEntry {
            features: set.to_vec(),
            weighted_f1: ev.table.weighted_avg.f1,
            macro_f1: ev.table.macro_avg.f1,
        });
        Ok(ev.table.weighted_avg.f1)
    };

    let mut current: Vec<usize> = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut stalled: Vec<usize> = Vec::new();
    let mut skipped = Vec::new();
    let mut reached = None;
    let mut pos = 0;

    // prefix walk
    while pos < ranking.len() && current.len() < budget {
        current.push(ranking[pos]);
        let f1 = evaluate(&current)?;
        if f1 >= target {
            reached = Some(current.clone());
            break;
        }
        if f1 >= best + config.epsilon {
            best = f1;
            stalled.clear();
        } else {
            stalled.push(pos);
        }
        pos += 1;
        if stalled.len() == config.patience {
            for _ in 0..stalled.len() {
                current.pop();
            }
            skipped.append(&mut stalled);
            break;
        }
    }

    // probe deeper ranks one at a time
    if reached.is_none() && !skipped.is_empty() {
        let (mut first, mut last): (Vec<usize>, Vec<usize>) = (pos..ranking.len()).partition(|&r| !config.deprioritized.contains(&ranking[r]));
        first.append(&mut last);
        for r in first {
            if current.len() >= budget {
                break;
            }
            let mut candidate = current.clone();
            candidate.push(ranking[r]);
            let f1 = evaluate(&candidate)?;
            if f1 >= target {
                reached = Some(candidate);
                break;
            }
            if f1 >= best + config.epsilon {
                best = f1;
                current = candidate;
            } else {
                skipped.push(r);
            }
        }
    }

    let selected = match &reached {
        Some(set) => set.clone(),
        None => {
            let top = trace.iter().map(|e| e.weighted_f1).fold(f64::NEG_INFINITY, f64::max);
            trace.iter().find(|e| e.weighted_f1 == top).expect("at least one evaluation").features.clone()
        }
    };
    skipped.sort_unstable();
    Ok(SubsetSearchResult {
        selected_names: selected.iter().map(|&j| ds.schema().feature_names[j].clone()).collect(),
        selected,
        reached_target: reached.is_some(),
        target_f1: target,
        trace,
        skipped_ranks: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, PlantedFeature, SynthSpec};
    use crate::learners::{fit_forest, Classifier, ForestParams};

    fn planted(n: usize, informative: Vec<PlantedFeature>, m: usize, seed: u64) -> Dataset {
        synth_generate(
            &SynthSpec {
                n_records: n,
                n_features: m,
                informative,
                class_mix: vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn leaf_tree_has_no_contributions() {
        let t = DecisionTree::leaf(vec![0.3, 0.7], 3);
        let pc = tree_contributions(&t, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(pc.bias, vec![0.3, 0.7]);
        assert!(pc.contributions.as_slice().iter().all(|&v| v == 0.0));
        assert!(tree_contributions(&t, &[1.0]).is_err());
    }

    #[test]
    fn single_split_credits_only_its_feature() {
        let x = Matrix::from_rows(&[[0.0, 0.0, 1.0, 0.0], [1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 1.0], [1.0, 1.0, 0.0, 0.0]]).unwrap();
        let y = [0, 1, 1, 0];
        let f = fit_forest(&x, &y, 2, &ForestParams::decision_tree().with_seed(1)).unwrap();
        let tree = &f.trees()[0];
        assert_eq!(tree.root_split().map(|s| s.feature), Some(3));
        assert_eq!(tree.depth(), 1);
        let pc = path_contributions(&f, x.row(1)).unwrap();
        for j in 0..4 {
            let nonzero = pc.contributions.row(j).iter().any(|&v| v != 0.0);
            assert_eq!(nonzero, j == 3);
        }
        assert_eq!(pc.reconstruct(), f.proba_row(x.row(1)));
    }

    #[test]
    fn reconstruction_matches_forest_probabilities() {
        let ds = planted(
            300,
            vec![PlantedFeature { feature: 0, class: 1, bias: 0.8 }, PlantedFeature { feature: 2, class: 0, bias: 0.7 }],
            5,
            3,
        );
        let y = ds.labels();
        let f = fit_forest(ds.features(), y, 6, &ForestParams::random_forest().with_trees(20).with_seed(3)).unwrap();
        for row in ds.features().rows() {
            let pc = path_contributions(&f, row).unwrap();
            for (a, b) in pc.reconstruct().iter().zip(f.predict_proba(&Matrix::from_rows(&[row]).unwrap()).unwrap()[0].iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn report_signs_follow_planting() {
        let ds = planted(
            800,
            vec![PlantedFeature { feature: 0, class: 1, bias: 0.9 }, PlantedFeature { feature: 1, class: 1, bias: 0.1 }],
            4,
            8,
        );
        let f = fit_forest(ds.features(), ds.labels(), 6, &ForestParams::random_forest().with_trees(30).with_seed(8)).unwrap();
        let names = ds.schema().feature_names.clone();
        let classes = ds.hierarchy().classes(Level::Fine).to_vec();
        let r = attribution_report(&f, ds.features(), &names, &classes, 1).unwrap();
        assert!(r.mean_signed.get(0, 1) > 0.0);
        assert!(!r.negative.contains(&0));
        assert_eq!(r.method, METHOD);

        // forest limited to feature 0: every other feature scores exactly 0
        let only0 = ds.features().select_cols(&[0]).hstack(&Matrix::zeros(ds.n_records(), 3)).unwrap();
        let f0 = fit_forest(&only0, ds.labels(), 6, &ForestParams::random_forest().with_trees(10).with_seed(8)).unwrap();
        let r0 = attribution_report(&f0, &only0, &names, &classes, 1).unwrap();
        for j in 1..4 {
            assert_eq!(r0.score[j], 0.0);
            assert!(!r0.negative.contains(&j));
        }
        assert_eq!(r0.order()[0], 0);
    }

    fn search_config() -> SearchConfig {
        SearchConfig {
            learner: LearnerSpec::Forest(ForestParams::random_forest().with_trees(10)),
            cv_k: 3,
            seed: 2,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn single_sufficient_feature_stops_immediately() {
        let ds = planted(200, vec![PlantedFeature { feature: 0, class: 1, bias: 1.0 }], 5, 4);
        let r = guided_subset_search(&[0, 1, 2, 3, 4], &ds, Level::Fine, 5, &search_config()).unwrap();
        assert_eq!(r.selected, vec![0]);
        assert!(r.reached_target);
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.trace[0].weighted_f1, 100.0);
        assert!(guided_subset_search(&[0], &ds, Level::Fine, 0, &search_config()).is_err());
    }

    #[test]
    fn skips_stalled_ranks_and_probes_deeper() {
        // class 1 needs both features 0 and 5 (0 AND 5); 1..4 are noise
        let base = planted(400, vec![], 6, 6);
        let x = base.features().clone();
        let labels: Vec<usize> = (0..x.n_rows()).map(|i| usize::from(x.get(i, 0) == 1.0 && x.get(i, 5) == 1.0)).collect();
        let ds = Dataset::new(base.schema().clone(), base.hierarchy().clone(), x, labels).unwrap();
        let ranking = [0, 1, 2, 3, 4, 5];
        let r = guided_subset_search(&ranking, &ds, Level::Fine, 6, &search_config()).unwrap();
        assert!(r.reached_target, "{:?}", r.trace);
        assert_eq!(r.selected, vec![0, 5]);
        assert!(r.skipped_ranks.contains(&1));
        let mut best = f64::NEG_INFINITY;
        for e in &r.trace {
            best = best.max(e.weighted_f1);
            assert!((0.0..=100.0).contains(&e.weighted_f1));
        }
        assert_eq!(guided_subset_search(&ranking, &ds, Level::Fine, 6, &search_config()).unwrap(), r);
        let csv = r.trace_csv(&ds.schema().feature_names);
        assert!(csv.starts_with("set_size,features,weighted_f1,macro_f1\n1,F0,"));

        let tight = guided_subset_search(&ranking, &ds, Level::Fine, 1, &search_config()).unwrap();
        assert!(!tight.reached_target);
        assert_eq!(tight.selected.len(), 1);
    }
}
