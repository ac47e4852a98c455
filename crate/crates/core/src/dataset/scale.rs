//! Min-max normalisation.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
}

impl ScalerParams {
    /// Parameters that leave unit-interval data unchanged.
    pub fn identity(n_features: usize) -> Self {
        ScalerParams {
            x_min: vec![0.0; n_features],
            x_max: vec![1.0; n_features],
        }
    }

    pub fn n_features(&self) -> usize {
        self.x_min.len()
    }

    /// Scale one value of feature `j`, clamped to [0, 1]. Constant features map to 0.
    #[inline]
    pub fn scale_value(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = (self.x_min[j], self.x_max[j]);
        if hi == lo {
            0.0
        } else {
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    pub fn scale_record(&self, record: &[f64]) -> Result<Vec<f64>> {
        if record.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: record.len(),
            });
        }
        Ok(record.iter().enumerate().map(|(j, &x)| self.scale_value(j, x)).collect())
    }
}

/// Fit per-feature min/max on `ds` and return the scaled dataset with the fitted parameters.
pub fn minmax_scale(ds: &Dataset) -> (Dataset, ScalerParams) {
    let m = ds.n_features();
    let mut x_min = vec![f64::INFINITY; m];
    let mut x_max = vec![f64::NEG_INFINITY; m];
    for row in ds.features().rows() {
        for (j, &v) in row.iter().enumerate() {
            x_min[j] = x_min[j].min(v);
            x_max[j] = x_max[j].max(v);
        }
    }
    let params = ScalerParams { x_min, x_max };
    let scaled = scale_matrix(ds.features(), &params);
    (ds.with_features(scaled), params)
}

/// Apply previously fitted parameters (e.g. training-fold statistics to held-out data).
pub fn apply_scaler(ds: &Dataset, params: &ScalerParams) -> Result<Dataset> {
    if params.n_features() != ds.n_features() || params.x_max.len() != params.x_min.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.n_features(),
            actual: params.n_features(),
        });
    }
    Ok(ds.with_features(scale_matrix(ds.features(), params)))
}

fn scale_matrix(x: &Matrix, params: &ScalerParams) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.n_rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = params.scale_value(j, *v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureKind, FeatureSchema, LabelHierarchy};
    use proptest::prelude::*;

    fn column_ds(cols: &[Vec<f64>]) -> Dataset {
        let n = cols[0].len();
        let rows: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        let schema = FeatureSchema::new(names, "label", FeatureKind::Real).unwrap();
        Dataset::new(schema, LabelHierarchy::iov(), Matrix::from_rows(&rows).unwrap(), vec![0; n]).unwrap()
    }

    #[test]
    fn scaling_examples() {
        let ds = column_ds(&[vec![0.0, 2.0, 4.0], vec![5.0, 5.0, 5.0], vec![0.0, 1.0, 1.0]]);
        let (scaled, params) = minmax_scale(&ds);
        assert_eq!(scaled.features().column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(scaled.features().column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(scaled.features().column(2), vec![0.0, 1.0, 1.0]);
        assert_eq!(params.x_min, vec![0.0, 5.0, 0.0]);
        assert_eq!(params.x_max, vec![4.0, 5.0, 1.0]);
    }

    #[test]
    fn apply_scaler_clamps_and_handles_constant() {
        let p = ScalerParams {
            x_min: vec![0.0, 3.0],
            x_max: vec![4.0, 3.0],
        };
        assert_eq!(p.scale_value(0, 2.0), 0.5);
        assert_eq!(p.scale_value(0, 8.0), 1.0);
        assert_eq!(p.scale_value(0, -1.0), 0.0);
        assert_eq!(p.scale_value(1, 17.0), 0.0);
        let ds = column_ds(&[vec![1.0]]);
        assert!(matches!(apply_scaler(&ds, &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn params_json_field_names() {
        let json = serde_json::to_string(&ScalerParams::identity(1)).unwrap();
        assert_eq!(json, r#"{"x_min":[0.0],"x_max":[1.0]}"#);
    }

    proptest! {
        #[test]
        fn idempotent_and_bounded(cols in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 5), 1..4)) {
            let ds = column_ds(&cols);
            let (once, _) = minmax_scale(&ds);
            let (twice, _) = minmax_scale(&once);
            prop_assert_eq!(once.features(), twice.features());
            for (j, col) in cols.iter().enumerate() {
                let scaled = once.features().column(j);
                let constant = col.iter().all(|&v| v == col[0]);
                let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if constant {
                    prop_assert!(scaled.iter().all(|&v| v == 0.0));
                } else {
                    prop_assert_eq!(lo, 0.0);
                    prop_assert_eq!(hi, 1.0);
                }
            }
        }
    }
}
