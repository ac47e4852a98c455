//! Boruta all-relevant feature selection on top of the random forest.
//!
//! Each run appends a shuffled copy ("shadow") of every surviving feature,
//! fits a forest on the augmented matrix and scores features by the Z-score of
//! their out-of-bag permutation importance. A feature scores a hit when its Z
//! beats the best shadow (MZSA). Accumulated hits are tested against a fair
//! coin; significant winners are Confirmed, significant losers Unimportant and
//! dropped from later runs.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learners::{fit_forest, permutation_importance, ForestParams, ImportanceVector};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BorutaConfig {
    pub max_runs: usize,
    pub forest: ForestParams,
    pub seed: u64,
    /// Significance level of the two-sided hit-count test.
    pub alpha: f64,
    /// Settle features still Tentative after the last run by comparing their
    /// median Z with the median MZSA.
    pub resolve_tentative: bool,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        BorutaConfig {
            max_runs: 100,
            forest: ForestParams::random_forest(),
            seed: 0,
            alpha: 0.05,
            resolve_tentative: true,
        }
    }
}

impl BorutaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_runs == 0 {
            return Err(Error::InvalidConfig("max_runs must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureStatus {
    Confirmed,
    Tentative,
    Unimportant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorutaResult {
    pub feature_names: Vec<String>,
    pub status: Vec<FeatureStatus>,
    /// Status of every feature after each run's hit test.
    pub status_history: Vec<Vec<FeatureStatus>>,
    /// `z_history[f][r]`; `None` once the feature has been dropped.
    pub z_history: Vec<Vec<Option<f64>>>,
    pub hits: Vec<usize>,
    pub mzsa_history: Vec<f64>,
    /// Features whose final status came from the median-Z fallback.
    pub fallback_resolved: Vec<usize>,
    pub ranking: Vec<usize>,
    pub config: BorutaConfig,
}

impl BorutaResult {
    pub fn runs(&self) -> usize {
        self.mzsa_history.len()
    }

    /// Median of the recorded Z-scores of feature `f`.
    pub fn median_z(&self, f: usize) -> f64 {
        median(self.z_history[f].iter().flatten().copied().collect()).unwrap_or(0.0)
    }

    pub fn with_status(&self, status: FeatureStatus) -> Vec<usize> {
        (0..self.status.len()).filter(|&f| self.status[f] == status).collect()
    }

    /// Ranked feature names, one per line.
    pub fn ranking_text(&self) -> String {
        self.ranking
            .iter()
            .map(|&f| format!("{}\n", self.feature_names[f]))
            .collect()
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// `[X, X_shadow]` where every shadow column is an independent row
/// permutation of its source column.
pub fn make_shadow<R: Rng>(x: &Matrix, rng: &mut R) -> Matrix {
    let mut shadow = Matrix::zeros(x.n_rows(), x.n_cols());
    for j in 0..x.n_cols() {
        let mut col = x.column(j);
        col.shuffle(rng);
        for (i, v) in col.into_iter().enumerate() {
            shadow.set(i, j, v);
        }
    }
    x.hstack(&shadow).expect("shadow has the same row count")
}

/// `importance / std`; a zero std maps to 0 for zero importance and to the
/// largest finite magnitude (sign kept) otherwise.
pub fn zscores(importance: &ImportanceVector) -> Vec<f64> {
    importance
        .importance
        .iter()
        .zip(&importance.std)
        .map(|(&imp, &sd)| {
            if sd > 0.0 {
                imp / sd
            } else if imp == 0.0 {
                0.0
            } else {
                f64::MAX.copysign(imp)
            }
        })
        .collect()
}

/// Hit (`true`) iff `Z_i > max(Z_shadow)`. Returns the verdicts and MZSA.
pub fn classify_run(z_real: &[f64], z_shadow: &[f64]) -> Result<(Vec<bool>, f64)> {
    if z_real.is_empty() || z_shadow.is_empty() {
        return Err(Error::EmptyInput("classify_run needs real and shadow scores".into()));
    }
    let mzsa = z_shadow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((z_real.iter().map(|&z| z > mzsa).collect(), mzsa))
}

/// Two-sided binomial test of `hits` out of `trials` against p = 0.5.
pub fn hit_test(hits: usize, trials: usize, alpha: f64) -> FeatureStatus {
    let n = trials as u64;
    let k = hits as u64;
    let coin = Binomial::new(0.5, n).expect("p = 0.5 is valid");
    let lower = coin.cdf(k);
    let upper = if k == 0 { 1.0 } else { coin.sf(k - 1) };
    let p = (2.0 * lower.min(upper)).min(1.0);
    if p >= alpha {
        FeatureStatus::Tentative
    } else if 2 * k > n {
        FeatureStatus::Confirmed
    } else {
        FeatureStatus::Unimportant
    }
}

pub fn boruta_run(ds: &Dataset, labels: &[usize], config: &BorutaConfig) -> Result<BorutaResult> {
    config.validate()?;
    let x = ds.features();
    if labels.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: labels.len(),
        });
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Degenerate("feature selection needs at least two classes".into()));
    }

    let m = x.n_cols();
    let mut status = vec![FeatureStatus::Tentative; m];
    let mut status_history = Vec::new();
    let mut z_history: Vec<Vec<Option<f64>>> = vec![Vec::new(); m];
    let mut hits = vec![0usize; m];
    let mut trials = vec![0usize; m];
    let mut mzsa_history = Vec::new();

    for run in 0..config.max_runs {
        if !status.contains(&FeatureStatus::Tentative) {
            break;
        }
        let active: Vec<usize> = (0..m).filter(|&f| status[f] != FeatureStatus::Unimportant).collect();
        let xa = x.select_cols(&active);
        let mut rng = seed::rng(config.seed, "shadow", &[run as u64]);
        let augmented = make_shadow(&xa, &mut rng);
        let forest_params = config.forest.with_seed(seed::derive(config.seed, "boruta-forest", &[run as u64]));
        let forest = fit_forest(&augmented, labels, n_classes, &forest_params)?;
        let imp = permutation_importance(
            &forest,
            &augmented,
            labels,
            seed::derive(config.seed, "boruta-importance", &[run as u64]),
        )?;
        let z = zscores(&imp);
        let (verdicts, mzsa) = classify_run(&z[..active.len()], &z[active.len()..])?;
        mzsa_history.push(mzsa);

        let mut slot = vec![None; m];
        for (a, &f) in active.iter().enumerate() {
            slot[f] = Some(z[a]);
            trials[f] += 1;
            hits[f] += usize::from(verdicts[a]);
        }
        for f in 0..m {
            z_history[f].push(slot[f]);
            if status[f] == FeatureStatus::Tentative {
                status[f] = hit_test(hits[f], trials[f], config.alpha);
            }
        }
        status_history.push(status.clone());
    }

    let mut result = BorutaResult {
        feature_names: ds.schema().feature_names.clone(),
        status,
        status_history,
        z_history,
        hits,
        mzsa_history,
        fallback_resolved: Vec::new(),
        ranking: Vec::new(),
        config: *config,
    };
    if config.resolve_tentative {
        let bar = median(result.mzsa_history.clone()).unwrap_or(0.0);
        for f in result.with_status(FeatureStatus::Tentative) {
            result.status[f] = if result.median_z(f) > bar {
                FeatureStatus::Confirmed
            } else {
                FeatureStatus::Unimportant
            };
            result.fallback_resolved.push(f);
        }
    }
    result.ranking = rank_features(&result);
    Ok(result)
}

/// Confirmed, then Tentative, then Unimportant; median Z descending within a
/// group; ties by feature index.
pub fn rank_features(result: &BorutaResult) -> Vec<usize> {
    let group = |s: FeatureStatus| match s {
        FeatureStatus::Confirmed => 0,
        FeatureStatus::Tentative => 1,
        FeatureStatus::Unimportant => 2,
    };
    let medians: Vec<f64> = (0..result.status.len()).map(|f| result.median_z(f)).collect();
    let mut order: Vec<usize> = (0..result.status.len()).collect();
    order.sort_by(|&a, &b| {
        group(result.status[a])
            .cmp(&group(result.status[b]))
            .then(medians[b].total_cmp(&medians[a]))
            .then(a.cmp(&b))
    });
    order
}
