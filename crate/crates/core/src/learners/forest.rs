//! Bootstrap random forest.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree_on, Columns, DecisionTree, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` means ceil(sqrt(M)).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub random_thresholds: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams::random_forest()
    }
}

impl ForestParams {
    pub fn random_forest() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            random_thresholds: false,
            seed: 0,
        }
    }

    /// Extremely randomized trees: whole sample, one random threshold per candidate.
    pub fn extra_trees() -> Self {
        ForestParams {
            bootstrap: false,
            random_thresholds: true,
            ..ForestParams::random_forest()
        }
    }

    /// A single exhaustive CART tree on the whole sample.
    pub fn decision_tree() -> Self {
        ForestParams {
            n_trees: 1,
            features_per_split: Some(usize::MAX),
            bootstrap: false,
            ..ForestParams::random_forest()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    fn tree_params(&self, n_features: usize) -> TreeParams {
        let default_mtry = (n_features as f64).sqrt().ceil() as usize;
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            features_per_split: Some(self.features_per_split.unwrap_or(default_mtry).min(n_features)),
            random_thresholds: self.random_thresholds,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    /// Rows drawn for each tree (size N, with replacement). Dropped from
    /// deployment bundles, where only prediction is needed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    bootstrap_indices: Vec<Vec<usize>>,
    n_classes: usize,
    n_features: usize,
    n_train: usize,
}

pub fn fit_forest(x: &Matrix, y: &[usize], n_classes: usize, params: &ForestParams) -> Result<ForestModel> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput("cannot fit a forest on zero rows".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("forest needs at least one tree".into()));
    }
    let n = x.n_rows();
    let tree_params = params.tree_params(x.n_cols());
    let cols = Columns::new(x);
    // Each tree owns the stream (seed, tree index): parallel and serial fits agree.
    let fitted: Vec<(DecisionTree, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(params.seed, "forest-tree", &[t as u64]);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let tree = fit_tree_on(&cols, y, n_classes, sample.clone(), &tree_params, &mut rng)?;
            Ok((tree, sample))
        })
        .collect::<Result<_>>()?;
    let (trees, bootstrap_indices) = fitted.into_iter().unzip();
    Ok(ForestModel {
        trees,
        bootstrap_indices,
        n_classes,
        n_features: x.n_cols(),
        n_train: n,
    })
}

impl ForestModel {
    /// Assemble a forest from already fitted trees (no bootstrap bookkeeping).
    pub fn from_trees(trees: Vec<DecisionTree>) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| Error::InvalidConfig("forest needs at least one tree".into()))?;
        let (n_classes, n_features) = (first.n_classes(), first.n_features());
        if trees.iter().any(|t| t.n_classes() != n_classes || t.n_features() != n_features) {
            return Err(Error::ArchitectureMismatch("trees disagree on shape".into()));
        }
        Ok(ForestModel {
            trees,
            bootstrap_indices: Vec::new(),
            n_classes,
            n_features,
            n_train: 0,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn bootstrap_indices(&self) -> &[Vec<usize>] {
        &self.bootstrap_indices
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Rows of the training set that tree `t` never saw.
    pub fn oob_rows(&self, t: usize) -> Vec<usize> {
        let Some(sample) = self.bootstrap_indices.get(t) else {
            return Vec::new();
        };
        let mut seen = vec![false; self.n_train];
        for &i in sample {
            seen[i] = true;
        }
        (0..self.n_train).filter(|&i| !seen[i]).collect()
    }

    /// Forget bootstrap samples; the model still predicts identically.
    pub fn without_bootstrap(mut self) -> Self {
        self.bootstrap_indices.clear();
        self
    }

    pub fn proba_row(&self, row: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.distribution(row)) {
                *a += p;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    /// Accuracy of the out-of-bag majority vote, over rows with at least one OOB tree.
    pub fn oob_accuracy(&self, x: &Matrix, y: &[usize]) -> Result<f64> {
        let mut votes = vec![vec![0usize; self.n_classes]; self.n_train];
        for t in 0..self.trees.len() {
            for i in self.oob_rows(t) {
                votes[i][self.trees[t].predict_class(x.row(i))] += 1;
            }
        }
        let mut seen = 0usize;
        let mut correct = 0usize;
        for (i, v) in votes.iter().enumerate() {
            if v.iter().any(|&c| c > 0) {
                seen += 1;
                let pred = v.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(c, _)| c);
                if pred == Some(y[i]) {
                    correct += 1;
                }
            }
        }
        if seen == 0 {
            return Err(Error::NoOobRows);
        }
        Ok(correct as f64 / seen as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::fit_tree;

    fn noisy_data(n: usize, seed_: u64) -> (Matrix, Vec<usize>) {
        let mut rng = seed::rng(seed_, "test", &[]);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).collect();
        let y = rows.iter().map(|r| usize::from(r[0] == 1.0 && rng.gen::<f64>() < 0.9)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_full_tree_matches_fit_tree_on_bootstrap() {
        let (x, y) = noisy_data(120, 1);
        let params = ForestParams {
            n_trees: 1,
            features_per_split: Some(x.n_cols()),
            seed: 5,
            ..ForestParams::random_forest()
        };
        let forest = fit_forest(&x, &y, 2, &params).unwrap();
        let sample = &forest.bootstrap_indices()[0];
        let xs = x.select_rows(sample);
        let ys: Vec<usize> = sample.iter().map(|&i| y[i]).collect();
        let tree = fit_tree(&xs, &ys, 2, &TreeParams::default()).unwrap();
        for i in 0..x.n_rows() {
            assert_eq!(forest.proba_row(x.row(i)), tree.distribution(x.row(i)));
        }
    }

    #[test]
    fn deterministic_and_bootstrap_sized() {
        let (x, y) = noisy_data(80, 2);
        let p = ForestParams::random_forest().with_trees(10).with_seed(3);
        let a = fit_forest(&x, &y, 2, &p).unwrap();
        assert_eq!(a, fit_forest(&x, &y, 2, &p).unwrap());
        assert!(a.bootstrap_indices().iter().all(|b| b.len() == 80));
    }

    #[test]
    fn identical_trees_equal_one_tree() {
        let (x, y) = noisy_data(50, 3);
        let tree = fit_tree(&x, &y, 2, &TreeParams::default()).unwrap();
        let forest = ForestModel::from_trees(vec![tree.clone(), tree.clone(), tree.clone()]).unwrap();
        for i in 0..x.n_rows() {
            assert_eq!(forest.proba_row(x.row(i)), tree.distribution(x.row(i)));
        }
    }

    #[test]
    fn oob_fraction_near_inverse_e() {
        let (x, y) = noisy_data(300, 4);
        let f = fit_forest(&x, &y, 2, &ForestParams::random_forest().with_trees(200).with_seed(1)).unwrap();
        let frac: f64 = (0..200).map(|t| f.oob_rows(t).len() as f64 / 300.0).sum::<f64>() / 200.0;
        assert!((0.30..=0.44).contains(&frac), "{frac}");
    }

    #[test]
    fn no_bootstrap_means_no_oob() {
        let (x, y) = noisy_data(30, 5);
        let f = fit_forest(&x, &y, 2, &ForestParams::extra_trees().with_trees(3)).unwrap();
        assert!(matches!(f.oob_accuracy(&x, &y), Err(Error::NoOobRows)));
        assert!(fit_forest(&x, &y, 2, &ForestParams::random_forest().with_trees(0)).is_err());
    }
}
