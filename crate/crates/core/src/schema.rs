//! Per-feature metadata, dataset schema and the in-memory dataset.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Integer,
    /// One column of a one-hot encoded categorical; see [`FeatureMetadata::onehot_group`].
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetadata {
    pub name: String,
    pub kind: FeatureKind,
    pub min: f64,
    pub max: f64,
    pub mutable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onehot_group: Option<u32>,
}

impl FeatureMetadata {
    pub fn continuous(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self { name: name.into(), kind: FeatureKind::Continuous, min, max, mutable: true, onehot_group: None }
    }

    pub fn integer(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self { kind: FeatureKind::Integer, ..Self::continuous(name, min, max) }
    }

    pub fn categorical(name: impl Into<String>, group: u32) -> Self {
        Self { kind: FeatureKind::Categorical, onehot_group: Some(group), ..Self::continuous(name, 0.0, 1.0) }
    }

    pub fn immutable(mut self) -> Self {
        self.mutable = false;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub features: Vec<FeatureMetadata>,
    /// Label of the class whose members are attacked.
    pub critical_class: u8,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("schema has no features")]
    Empty,
    #[error("duplicate feature name `{0}`")]
    DuplicateName(String),
    #[error("feature `{0}` is not a valid identifier")]
    BadName(String),
    #[error("feature `{name}` has min {min} > max {max}")]
    InvertedBounds { name: String, min: f64, max: f64 },
    #[error("categorical feature `{0}` needs an onehot_group and bounds [0, 1]")]
    BadCategorical(String),
    #[error("feature `{0}` has an onehot_group but is not categorical")]
    StrayGroup(String),
    #[error("onehot group {0} has features with different mutability")]
    MixedGroupMutability(u32),
    #[error("critical class must be 0 or 1, got {0}")]
    BadCriticalClass(u8),
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl DatasetSchema {
    pub fn new(features: Vec<FeatureMetadata>, critical_class: u8) -> Result<Self, SchemaError> {
        let s = Self { features, critical_class };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.features.is_empty() {
            return Err(SchemaError::Empty);
        }
        if self.critical_class > 1 {
            return Err(SchemaError::BadCriticalClass(self.critical_class));
        }
        for (i, f) in self.features.iter().enumerate() {
            if !is_identifier(&f.name) {
                return Err(SchemaError::BadName(f.name.clone()));
            }
            if self.features[..i].iter().any(|g| g.name == f.name) {
                return Err(SchemaError::DuplicateName(f.name.clone()));
            }
            if !(f.min <= f.max) {
                return Err(SchemaError::InvertedBounds { name: f.name.clone(), min: f.min, max: f.max });
            }
            match (f.kind, f.onehot_group) {
                (FeatureKind::Categorical, Some(_)) if f.min == 0.0 && f.max == 1.0 => {}
                (FeatureKind::Categorical, _) => return Err(SchemaError::BadCategorical(f.name.clone())),
                (_, Some(_)) => return Err(SchemaError::StrayGroup(f.name.clone())),
                _ => {}
            }
        }
        for group in self.onehot_groups() {
            let m = self.features[group.1[0]].mutable;
            if group.1.iter().any(|&j| self.features[j].mutable != m) {
                return Err(SchemaError::MixedGroupMutability(group.0));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn mutable_mask(&self) -> Vec<bool> {
        self.features.iter().map(|f| f.mutable).collect()
    }

    /// One-hot groups as `(group id, column indices)`, ordered by first column.
    pub fn onehot_groups(&self) -> Vec<(u32, Vec<usize>)> {
        let mut out: Vec<(u32, Vec<usize>)> = Vec::new();
        for (j, f) in self.features.iter().enumerate() {
            if let Some(g) = f.onehot_group {
                match out.iter_mut().find(|(id, _)| *id == g) {
                    Some((_, cols)) => cols.push(j),
                    None => out.push((g, alloc::vec![j])),
                }
            }
        }
        out
    }

    /// First bound, type or one-hot violation of a raw row, if any.
    pub fn row_violation(&self, row: &[f64]) -> Option<RowViolation> {
        if row.len() != self.features.len() {
            return Some(RowViolation::Width { expected: self.features.len(), got: row.len() });
        }
        for (j, (f, &v)) in self.features.iter().zip(row).enumerate() {
            if !v.is_finite() {
                return Some(RowViolation::NonFinite { column: j });
            }
            if v < f.min || v > f.max {
                return Some(RowViolation::OutOfBounds { column: j, value: v });
            }
            if f.kind != FeatureKind::Continuous && math::round(v) != v {
                return Some(RowViolation::NotInteger { column: j, value: v });
            }
        }
        for (g, cols) in self.onehot_groups() {
            let hot = cols.iter().filter(|&&j| row[j] == 1.0).count();
            if hot != 1 {
                return Some(RowViolation::OneHot { group: g });
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowViolation {
    Width { expected: usize, got: usize },
    NonFinite { column: usize },
    OutOfBounds { column: usize, value: f64 },
    NotInteger { column: usize, value: f64 },
    OneHot { group: u32 },
}

/// Feature matrix plus binary labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("no rows")]
    NoRows,
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("dataset has {got} columns, schema has {expected}")]
    Width { expected: usize, got: usize },
    #[error("row {row}, column `{column}`: value {value} outside [{min}, {max}]")]
    OutOfBounds { row: usize, column: String, value: f64, min: f64, max: f64 },
    #[error("row {row}, column `{column}`: non-finite value")]
    NonFinite { row: usize, column: String },
    #[error("row {row}, column `{column}`: {value} is not an integer")]
    NotInteger { row: usize, column: String, value: f64 },
    #[error("row {row}: one-hot group {group} is not exactly one-hot")]
    OneHot { row: usize, group: u32 },
    #[error("row {row}: label {label} is not binary")]
    NonBinaryLabel { row: usize, label: u8 },
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<u8>) -> Result<Self, DataError> {
        if x.rows() != y.len() {
            return Err(DataError::LabelCount { rows: x.rows(), labels: y.len() });
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset { x: self.x.select_rows(idx), y: idx.iter().map(|&i| self.y[i]).collect() }
    }

    /// Checks shape, bounds, types, one-hot groups and labels against `schema`.
    pub fn validate(&self, schema: &DatasetSchema) -> Result<(), DataError> {
        if self.is_empty() {
            return Err(DataError::NoRows);
        }
        if self.x.rows() != self.y.len() {
            return Err(DataError::LabelCount { rows: self.x.rows(), labels: self.y.len() });
        }
        if self.x.cols() != schema.n_features() {
            return Err(DataError::Width { expected: schema.n_features(), got: self.x.cols() });
        }
        for (i, row) in self.x.iter_rows().enumerate() {
            if self.y[i] > 1 {
                return Err(DataError::NonBinaryLabel { row: i, label: self.y[i] });
            }
            let name = |j: usize| schema.features[j].name.clone();
            match schema.row_violation(row) {
                None => {}
                Some(RowViolation::Width { expected, got }) => return Err(DataError::Width { expected, got }),
                Some(RowViolation::NonFinite { column }) => {
                    return Err(DataError::NonFinite { row: i, column: name(column) })
                }
                Some(RowViolation::OutOfBounds { column, value }) => {
                    let f = &schema.features[column];
                    return Err(DataError::OutOfBounds { row: i, column: name(column), value, min: f.min, max: f.max });
                }
                Some(RowViolation::NotInteger { column, value }) => {
                    return Err(DataError::NotInteger { row: i, column: name(column), value })
                }
                Some(RowViolation::OneHot { group }) => return Err(DataError::OneHot { row: i, group }),
            }
        }
        Ok(())
    }
}
