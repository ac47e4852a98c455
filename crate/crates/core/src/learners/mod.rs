//! Base learners behind one [`Classifier`] interface.

mod complexity;
mod forest;
mod importance;
mod logistic;
mod tree;

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use complexity::{balanced_depth, cascade_predict_ops, complexity_estimate, ComplexityEstimate, LevelCost};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use importance::{permutation_importance, ImportanceVector};
pub use logistic::{fit_logistic, LogisticModel, LogisticParams};
pub use tree::{fit_tree, DecisionTree, Split, TreeNode, TreeParams};

pub(crate) use logistic::softmax;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn n_classes(&self) -> usize;
    fn n_features(&self) -> usize;

    /// Class distribution for one row; the row length is not checked.
    fn proba_row(&self, row: &[f64]) -> Vec<f64>;

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: row.len(),
            });
        }
        Ok(())
    }

    fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| self.proba_row(r)).collect())
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }

    fn predict_row(&self, row: &[f64]) -> Result<usize> {
        self.check_row(row)?;
        Ok(argmax(&self.proba_row(row)))
    }
}

impl Classifier for DecisionTree {
    fn n_classes(&self) -> usize {
        DecisionTree::n_classes(self)
    }
    fn n_features(&self) -> usize {
        DecisionTree::n_features(self)
    }
    fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.distribution(row).to_vec()
    }
}

impl Classifier for ForestModel {
    fn n_classes(&self) -> usize {
        ForestModel::n_classes(self)
    }
    fn n_features(&self) -> usize {
        ForestModel::n_features(self)
    }
    fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        ForestModel::proba_row(self, row)
    }
}

impl Classifier for LogisticModel {
    fn n_classes(&self) -> usize {
        LogisticModel::n_classes(self)
    }
    fn n_features(&self) -> usize {
        LogisticModel::n_features(self)
    }
    fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        LogisticModel::proba_row(self, row)
    }
}

/// Any trained base learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(DecisionTree),
    Forest(ForestModel),
    Logistic(LogisticModel),
}

impl Model {
    pub fn as_forest(&self) -> Option<&ForestModel> {
        match self {
            Model::Forest(f) => Some(f),
            _ => None,
        }
    }

    /// Drop training-only bookkeeping (bootstrap samples, loss history).
    pub fn for_deployment(self) -> Model {
        match self {
            Model::Forest(f) => Model::Forest(f.without_bootstrap()),
            other => other,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Tree(t) => t,
            Model::Forest(f) => f,
            Model::Logistic(l) => l,
        }
    }
}

impl Classifier for Model {
    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }
    fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        self.inner().proba_row(row)
    }
}

pub const MODEL_FORMAT: &str = "hierids-model";
pub const MODEL_VERSION: u32 = 1;

/// Versioned JSON envelope around a [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub version: u32,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(model: Model) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model document {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc)
    }
}

/// Which learner to train, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    /// Random forest, extra trees and the single decision tree are all
    /// presets of [`ForestParams`].
    Forest(ForestParams),
    Logistic(LogisticParams),
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec::Forest(ForestParams::random_forest())
    }
}

impl LearnerSpec {
    pub fn seed(&self) -> u64 {
        match self {
            LearnerSpec::Forest(p) => p.seed,
            LearnerSpec::Logistic(p) => p.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            LearnerSpec::Forest(p) => p.seed = seed,
            LearnerSpec::Logistic(p) => p.seed = seed,
        }
        self
    }

    pub fn fit(&self, x: &Matrix, y: &[usize], n_classes: usize) -> Result<Model> {
        match self {
            LearnerSpec::Forest(p) if p.n_trees == 1 && !p.bootstrap => {
                let forest = fit_forest(x, y, n_classes, p)?;
                Ok(Model::Tree(forest.trees()[0].clone()))
            }
            LearnerSpec::Forest(p) => Ok(Model::Forest(fit_forest(x, y, n_classes, p)?)),
            LearnerSpec::Logistic(p) => Ok(Model::Logistic(fit_logistic(x, y, n_classes, p)?)),
        }
    }
}

impl FromStr for LearnerSpec {
    type Err = Error;

    /// `rf`, `et`, `dt` or `lr` (long names accepted too).
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rf" | "forest" | "random_forest" | "random-forest" => Ok(LearnerSpec::Forest(ForestParams::random_forest())),
            "et" | "extra_trees" | "extra-trees" => Ok(LearnerSpec::Forest(ForestParams::extra_trees())),
            "dt" | "tree" | "decision_tree" | "decision-tree" => Ok(LearnerSpec::Forest(ForestParams::decision_tree())),
            "lr" | "logistic" | "logistic_regression" => Ok(LearnerSpec::Logistic(LogisticParams::default())),
            other => Err(Error::UnknownLearner(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<usize>) {
        let rows: Vec<[f64; 3]> = (0..60).map(|i| [f64::from(i % 2), f64::from((i / 2) % 2), f64::from(i % 5) / 4.0]).collect();
        let y = rows.iter().map(|r| (r[0] + r[1]) as usize).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn learner_names() {
        assert!(matches!("rf".parse::<LearnerSpec>().unwrap(), LearnerSpec::Forest(p) if p.bootstrap));
        assert!(matches!("ET".parse::<LearnerSpec>().unwrap(), LearnerSpec::Forest(p) if p.random_thresholds));
        assert!(matches!("lr".parse::<LearnerSpec>().unwrap(), LearnerSpec::Logistic(_)));
        assert!(matches!("svm".parse::<LearnerSpec>(), Err(Error::UnknownLearner(_))));
    }

    #[test]
    fn probabilities_normalized_for_every_learner() {
        let (x, y) = data();
        for name in ["rf", "et", "dt", "lr"] {
            let spec: LearnerSpec = name.parse().unwrap();
            let model = spec.with_seed(4).fit(&x, &y, 3).unwrap();
            for p in model.predict_proba(&x).unwrap() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{name}");
                assert!(p.iter().all(|&v| v >= 0.0));
            }
            assert!(model.predict_proba(&Matrix::zeros(1, 2)).is_err());
        }
    }

    #[test]
    fn zero_logistic_is_uniform() {
        let m = LogisticModel::zeros(4, 3);
        assert_eq!(m.proba_row(&[1.0, 0.0, 1.0]), vec![0.25; 4]);
    }

    #[test]
    fn leaf_tree_predicts_leaf_distribution() {
        let t = DecisionTree::leaf(vec![0.2, 0.8], 2);
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(t.predict_proba(&x).unwrap(), vec![vec![0.2, 0.8]; 2]);
    }

    #[test]
    fn model_json_round_trips_bit_exactly() {
        let (x, y) = data();
        for name in ["rf", "dt", "lr"] {
            let model = name.parse::<LearnerSpec>().unwrap().with_seed(2).fit(&x, &y, 3).unwrap();
            let json = ModelDocument::new(model.clone()).to_json().unwrap();
            let back = ModelDocument::from_json(&json).unwrap();
            assert_eq!(back.model, model);
            assert_eq!(back.to_json().unwrap(), json);
        }
        assert!(ModelDocument::from_json(r#"{"format":"x","version":1,"model":{"kind":"tree","nodes":[],"n_features":0,"n_classes":0,"depth":0}}"#).is_err());
    }
}
