//! Per-feature min-max scaling to `[0, 1]`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::schema::DatasetSchema;

/// Widths below this are treated as constant features and clamped to 1.
const MIN_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalerError {
    #[error("cannot fit a scaler on zero rows")]
    Empty,
    #[error("scaler expects {expected} features, got {got}")]
    Width { expected: usize, got: usize },
    #[error("scaler has not been fitted")]
    NotFitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Fits column minima and maxima of `x`.
    pub fn fit(x: &Matrix) -> Result<Self, ScalerError> {
        if x.rows() == 0 {
            return Err(ScalerError::Empty);
        }
        let mut min = x.row(0).to_vec();
        let mut max = min.clone();
        for row in x.iter_rows().skip(1) {
            for (j, &v) in row.iter().enumerate() {
                if v < min[j] {
                    min[j] = v;
                }
                if v > max[j] {
                    max[j] = v;
                }
            }
        }
        Ok(Self { min, max })
    }

    pub fn from_bounds(min: Vec<f64>, max: Vec<f64>) -> Result<Self, ScalerError> {
        if min.len() != max.len() {
            return Err(ScalerError::Width { expected: min.len(), got: max.len() });
        }
        Ok(Self { min, max })
    }

    /// Maps every schema range onto `[0, 1]`.
    pub fn from_schema(schema: &DatasetSchema) -> Self {
        let min = schema.features.iter().map(|f| f.min).collect();
        let max = schema.features.iter().map(|f| f.max).collect();
        Self { min, max }
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    #[inline]
    pub fn width(&self, j: usize) -> f64 {
        let w = self.max[j] - self.min[j];
        if w < MIN_WIDTH { 1.0 } else { w }
    }

    #[inline]
    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        (v - self.min[j]) / self.width(j)
    }

    #[inline]
    pub fn unscale_value(&self, j: usize, z: f64) -> f64 {
        self.min[j] + z * self.width(j)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.scale_value(j, v)).collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &z)| self.unscale_value(j, z)).collect()
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix, ScalerError> {
        self.map(x, Self::scale_value)
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Result<Matrix, ScalerError> {
        self.map(x, Self::unscale_value)
    }

    fn map(&self, x: &Matrix, f: fn(&Self, usize, f64) -> f64) -> Result<Matrix, ScalerError> {
        if x.cols() != self.n_features() {
            return Err(ScalerError::Width { expected: self.n_features(), got: x.cols() });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = f(self, j, *v);
            }
        }
        Ok(out)
    }
}
