//! Traffic records, their label hierarchy, and the data preparation steps:
//! CSV ingestion, min-max scaling, stratified folds and synthetic generation.

mod folds;
mod io;
mod labels;
mod scale;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use folds::{stratified_folds, stratified_folds_for_labels, FoldAssignment};
pub use io::{load_csv, read_csv, read_header, save_csv, write_csv};
pub use labels::{coarsen_labels, LabelHierarchy, Level, BENIGN};
pub use scale::{apply_scaler, minmax_scale, ScalerParams};
pub use synth::{cic_iov2024_mix, synth_generate, PlantedFeature, SynthSpec, CIC_IOV2024_CLASS_COUNTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Every value is exactly 0 or 1 (the bit-level CAN representation).
    #[default]
    Binary,
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub feature_names: Vec<String>,
    pub label_column: String,
    pub feature_kind: FeatureKind,
    /// Extra CSV columns that are neither features nor the label, e.g. the
    /// coarse `category` column shipped alongside the fine label.
    #[serde(default)]
    pub ignored_columns: Vec<String>,
}

impl FeatureSchema {
    pub fn new(feature_names: Vec<String>, label_column: impl Into<String>, feature_kind: FeatureKind) -> Result<Self> {
        let schema = FeatureSchema {
            feature_names,
            label_column: label_column.into(),
            feature_kind,
            ignored_columns: Vec::new(),
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Every header column that is not the label or explicitly ignored becomes a feature.
    pub fn from_header(
        header: &[String],
        label_column: &str,
        ignored_columns: &[String],
        feature_kind: FeatureKind,
    ) -> Result<Self> {
        if !header.iter().any(|h| h == label_column) {
            return Err(Error::Schema(format!("missing label column `{label_column}`")));
        }
        let feature_names = header
            .iter()
            .filter(|h| *h != label_column && !ignored_columns.contains(h))
            .cloned()
            .collect();
        let schema = FeatureSchema {
            feature_names,
            label_column: label_column.to_string(),
            feature_kind,
            ignored_columns: ignored_columns.to_vec(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_names.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{name}`")));
            }
        }
        if seen.contains(self.label_column.as_str()) {
            return Err(Error::Schema(format!(
                "label column `{}` is also listed as a feature",
                self.label_column
            )));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Resolve feature names to column indices, preserving the given order.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::Schema(format!("unknown feature `{n}`")))
            })
            .collect()
    }

    fn project(&self, cols: &[usize]) -> FeatureSchema {
        FeatureSchema {
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            label_column: self.label_column.clone(),
            feature_kind: self.feature_kind,
            ignored_columns: self.ignored_columns.clone(),
        }
    }
}

/// N labelled records over M features. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    hierarchy: LabelHierarchy,
    features: Matrix,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, hierarchy: LabelHierarchy, features: Matrix, labels: Vec<usize>) -> Result<Self> {
        schema.validate()?;
        if features.n_rows() == 0 {
            return Err(Error::EmptyInput("dataset has no records".into()));
        }
        if features.n_cols() != schema.n_features() {
            return Err(Error::DimensionMismatch {
                expected: schema.n_features(),
                actual: features.n_cols(),
            });
        }
        if labels.len() != features.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= hierarchy.n_fine()) {
            return Err(Error::UnknownLabel(bad.to_string()));
        }
        Ok(Dataset {
            schema,
            hierarchy,
            features,
            labels,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn hierarchy(&self) -> &LabelHierarchy {
        &self.hierarchy
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// Fine class ids.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn labels_at(&self, level: Level) -> Vec<usize> {
        coarsen_labels(&self.labels, &self.hierarchy, level).expect("labels validated at construction")
    }

    pub fn n_records(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn record(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Per fine class record counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.hierarchy.n_fine()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("empty record subset".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_records()) {
            return Err(Error::DimensionMismatch {
                expected: self.n_records(),
                actual: bad,
            });
        }
        Ok(Dataset {
            schema: self.schema.clone(),
            hierarchy: self.hierarchy.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        })
    }

    /// Keep only the given feature columns, in that order.
    pub fn select_features(&self, cols: &[usize]) -> Result<Dataset> {
        if cols.is_empty() {
            return Err(Error::Schema("empty feature subset".into()));
        }
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.n_features()) {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: bad,
            });
        }
        Ok(Dataset {
            schema: self.schema.project(cols),
            hierarchy: self.hierarchy.clone(),
            features: self.features.select_cols(cols),
            labels: self.labels.clone(),
        })
    }

    pub(crate) fn with_features(&self, features: Matrix) -> Dataset {
        debug_assert_eq!(features.n_rows(), self.n_records());
        Dataset {
            schema: self.schema.clone(),
            hierarchy: self.hierarchy.clone(),
            features,
            labels: self.labels.clone(),
        }
    }
}
