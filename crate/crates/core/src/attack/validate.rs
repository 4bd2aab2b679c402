use serde::{Deserialize, Serialize};

use super::{distance, Norm, DISTANCE_SLACK};
use crate::dsl::ConstraintSet;
use crate::engine::{penalty, PenaltyConfig};
use crate::scaler::MinMaxScaler;
use crate::schema::{DatasetSchema, RowViolation};

/// First reason a candidate is not a valid adversarial example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    /// Constraint `index` has a penalty above tolerance.
    Constraint { index: usize, penalty: f64 },
    Distance { distance: f64 },
    Immutable { column: usize },
    Row(RowViolation),
}

/// Candidate validation that works on raw rows through the tree-walking
/// constraint semantics, independent of the attack internals.
#[derive(Clone, Debug)]
pub struct Validator<'a> {
    schema: &'a DatasetSchema,
    constraints: &'a ConstraintSet,
    scaler: &'a MinMaxScaler,
    penalty_cfg: PenaltyConfig,
    norm: Norm,
    eps: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub constraint: usize,
    pub distance: usize,
    pub immutable: usize,
    pub row: usize,
}

impl<'a> Validator<'a> {
    pub fn new(
        schema: &'a DatasetSchema,
        constraints: &'a ConstraintSet,
        scaler: &'a MinMaxScaler,
        penalty_cfg: PenaltyConfig,
        norm: Norm,
        eps: f64,
    ) -> Self {
        Self { schema, constraints, scaler, penalty_cfg, norm, eps }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Checks types and bounds, immutability, the distance budget and every
    /// constraint, in that order.
    pub fn violation(&self, orig: &[f64], candidate: &[f64]) -> Option<Violation> {
        if let Some(v) = self.schema.row_violation(candidate) {
            return Some(Violation::Row(v));
        }
        for (j, f) in self.schema.features.iter().enumerate() {
            if !f.mutable && orig[j].to_bits() != candidate[j].to_bits() {
                return Some(Violation::Immutable { column: j });
            }
        }
        let d = distance(self.norm, &self.scaler.transform_row(candidate), &self.scaler.transform_row(orig));
        if !(d <= self.eps + DISTANCE_SLACK) {
            return Some(Violation::Distance { distance: d });
        }
        for (index, c) in self.constraints.iter().enumerate() {
            let p = penalty(c, candidate, &self.penalty_cfg);
            if !(p <= self.penalty_cfg.tolerance) {
                return Some(Violation::Constraint { index, penalty: p });
            }
        }
        None
    }

    pub fn is_valid(&self, orig: &[f64], candidate: &[f64]) -> bool {
        self.violation(orig, candidate).is_none()
    }
}

impl ViolationCounts {
    pub fn add(&mut self, v: &Violation) {
        match v {
            Violation::Constraint { .. } => self.constraint += 1,
            Violation::Distance { .. } => self.distance += 1,
            Violation::Immutable { .. } => self.immutable += 1,
            Violation::Row(_) => self.row += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.constraint + self.distance + self.immutable + self.row
    }
}
