//! Operation-count estimates for forest training and cascaded prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    /// T · M · N · d
    pub train_ops: u128,
    /// T · d · M for one record through one forest.
    pub predict_ops_per_record: u128,
}

/// Trees and training-set size of one cascade level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCost {
    pub trees: u64,
    pub samples: u64,
}

/// ⌈log₂ n⌉, the depth of a balanced tree over `n` samples.
pub fn balanced_depth(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        u64::from(u64::BITS - (n - 1).leading_zeros())
    }
}

/// `depth = None` uses the balanced-tree depth ⌈log₂ N⌉.
pub fn complexity_estimate(trees: u64, features: u64, samples: u64, depth: Option<u64>) -> Result<ComplexityEstimate> {
    if trees == 0 || features == 0 || samples == 0 || depth == Some(0) {
        return Err(Error::InvalidConfig("complexity inputs must be positive".into()));
    }
    let d = u128::from(depth.unwrap_or_else(|| balanced_depth(samples)));
    let (t, m, n) = (u128::from(trees), u128::from(features), u128::from(samples));
    Ok(ComplexityEstimate {
        train_ops: t * m * n * d,
        predict_ops_per_record: t * d * m,
    })
}

/// Σ_levels T_i · ⌈log₂ N_i⌉ · M: one record walking every level of the cascade.
pub fn cascade_predict_ops(levels: &[LevelCost], features: u64) -> u128 {
    levels
        .iter()
        .map(|l| u128::from(l.trees) * u128::from(balanced_depth(l.samples)))
        .sum::<u128>()
        * u128::from(features)
}
