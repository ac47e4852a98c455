//! Stratified k-fold partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
    /// Classes with fewer than `k` members; some folds will lack them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    stratified_folds_for_labels(ds.labels(), k, seed)
}

/// Shuffle each class with its own seeded stream and deal it round-robin into
/// `k` folds. The dealing position carries over from one class to the next so
/// fold sizes stay balanced overall, not only per class.
pub fn stratified_folds_for_labels(labels: &[usize], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("fold count must be at least 2, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("no records to partition".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut fold_of = vec![0; labels.len()];
    let mut warnings = Vec::new();
    let mut next = 0usize;
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            warnings.push(format!(
                "class {class} has {} records, fewer than {k} folds",
                members.len()
            ));
        }
        let mut rng = seed::rng(seed, "folds", &[class as u64]);
        members.shuffle(&mut rng);
        for &i in members.iter() {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldAssignment { k, fold_of, warnings })
}
