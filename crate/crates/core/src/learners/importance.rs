//! Out-of-bag permutation importance.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::ForestModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    /// Mean over trees of the OOB error increase when the feature is permuted.
    pub importance: Vec<f64>,
    /// Population standard deviation of the per-tree increases.
    pub std: Vec<f64>,
    /// Trees that had at least one OOB row.
    pub trees_used: usize,
}

/// For every tree and feature, permute the feature inside the tree's OOB rows
/// and record `error_permuted - error_original`. Positive values mean the
/// feature helps. A feature a tree never splits on contributes exactly 0.
///
/// `x` and `y` must be the training data the forest was fitted on.
pub fn permutation_importance(model: &ForestModel, x: &Matrix, y: &[usize], seed: u64) -> Result<ImportanceVector> {
    if x.n_rows() != model.n_train() || y.len() != model.n_train() {
        return Err(Error::DimensionMismatch {
            expected: model.n_train(),
            actual: x.n_rows(),
        });
    }
    if x.n_cols() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: x.n_cols(),
        });
    }
    let m = x.n_cols();
    let per_tree: Vec<Option<Vec<f64>>> = (0..model.trees().len())
        .into_par_iter()
        .map(|t| {
            let oob = model.oob_rows(t);
            if oob.is_empty() {
                return None;
            }
            let tree = &model.trees()[t];
            let nodes = tree.nodes();
            let n_oob = oob.len() as f64;
            // A permutation of feature j can only change rows whose path tests j.
            let mut touching: Vec<Vec<usize>> = vec![Vec::new(); m];
            let mut wrong_before = Vec::with_capacity(oob.len());
            for (k, &i) in oob.iter().enumerate() {
                let row = x.row(i);
                let mut at = 0;
                while let Some(s) = nodes[at].split {
                    if touching[s.feature].last() != Some(&k) {
                        touching[s.feature].push(k);
                    }
                    at = if row[s.feature] <= s.threshold { s.left } else { s.right };
                }
                wrong_before.push(super::argmax(&nodes[at].distribution) != y[i]);
            }
            let base_wrong = wrong_before.iter().filter(|&&w| w).count() as f64;
            let used = tree.used_features();
            let drops = (0..m)
                .map(|j| {
                    if !used[j] {
                        return 0.0;
                    }
                    let mut rng = seed::rng(seed, "permutation", &[t as u64, j as u64]);
                    let mut values: Vec<f64> = oob.iter().map(|&i| x.get(i, j)).collect();
                    values.shuffle(&mut rng);
                    let mut wrong = base_wrong;
                    for &k in &touching[j] {
                        let now = tree.predict_class_with(x.row(oob[k]), j, values[k]) != y[oob[k]];
                        wrong += f64::from(u8::from(now)) - f64::from(u8::from(wrong_before[k]));
                    }
                    (wrong - base_wrong) / n_oob
                })
                .collect();
            Some(drops)
        })
        .collect();

    let rows: Vec<Vec<f64>> = per_tree.into_iter().flatten().collect();
    if rows.is_empty() {
        return Err(Error::NoOobRows);
    }
    let t = rows.len() as f64;
    let mut importance = vec![0.0; m];
    let mut std = vec![0.0; m];
    for j in 0..m {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / t;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / t;
        importance[j] = mean;
        std[j] = var.sqrt();
    }
    Ok(ImportanceVector {
        importance,
        std,
        trees_used: rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, PlantedFeature, SynthSpec, Level};
    use crate::learners::forest::{fit_forest, ForestParams};

    fn planted(seed: u64) -> (Matrix, Vec<usize>) {
        let spec = SynthSpec {
            n_records: 600,
            n_features: 6,
            informative: vec![PlantedFeature {
                feature: 2,
                class: 1,
                bias: 1.0,
            }],
            class_mix: vec![0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
        };
        let ds = synth_generate(&spec, seed).unwrap();
        (ds.features().clone(), ds.labels_at(Level::Fine))
    }

    #[test]
    fn planted_feature_dominates_and_noise_is_near_zero() {
        let (x, y) = planted(1);
        let f = fit_forest(&x, &y, 6, &ForestParams::random_forest().with_trees(60).with_seed(2)).unwrap();
        let imp = permutation_importance(&f, &x, &y, 7).unwrap();
        let best = (0..6).max_by(|&a, &b| imp.importance[a].total_cmp(&imp.importance[b])).unwrap();
        assert_eq!(best, 2);
        for j in (0..6).filter(|&j| j != 2) {
            assert!(imp.importance[2] > imp.importance[j]);
            let bound = 2.0 * imp.std[j] / (imp.trees_used as f64).sqrt();
            assert!(imp.importance[j].abs() <= bound.max(1e-12) || imp.importance[j].abs() < 0.01, "feature {j}: {imp:?}");
        }
        assert!(imp.std.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn unused_feature_contributes_exactly_zero() {
        let (x, y) = planted(2);
        // one stump on the planted indicator: no other feature is ever split on
        let params = ForestParams {
            max_depth: Some(1),
            features_per_split: Some(6),
            ..ForestParams::random_forest().with_trees(10)
        };
        let f = fit_forest(&x, &y, 6, &params).unwrap();
        let imp = permutation_importance(&f, &x, &y, 1).unwrap();
        for j in (0..6).filter(|&j| j != 2) {
            assert_eq!(imp.importance[j], 0.0);
            assert_eq!(imp.std[j], 0.0);
        }
        assert!(imp.importance[2] > 0.4);
    }

    #[test]
    fn errors_without_oob_or_on_wrong_data() {
        let (x, y) = planted(3);
        let f = fit_forest(&x, &y, 6, &ForestParams::decision_tree()).unwrap();
        assert!(matches!(permutation_importance(&f, &x, &y, 0), Err(Error::NoOobRows)));
        let f = fit_forest(&x, &y, 6, &ForestParams::random_forest().with_trees(2)).unwrap();
        let short = x.select_rows(&[0, 1]);
        assert!(permutation_importance(&f, &short, &y[..2], 0).is_err());
    }
}
