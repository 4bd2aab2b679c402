use alloc::vec::Vec;

use thiserror::Error;

use super::{evaluate_expr_with, penalty, EngineError, PenaltyConfig};
use crate::dsl::{Constraint, ConstraintSet, NumExpr, RelOp};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixError {
    #[error("fix constraint must have the form `F<i> == expr`")]
    NotAssignment,
    #[error("fix target F{0} appears on its own right-hand side")]
    SelfReference(usize),
}

/// Repair rule: when `guard` is violated, assign `target := expr`.
#[derive(Clone, Debug, PartialEq)]
pub struct FixRule {
    pub guard: Constraint,
    pub target: usize,
    pub expr: NumExpr,
}

impl FixRule {
    /// `fix` must be `Feature(i) == expr` with `i` absent from `expr`.
    pub fn new(guard: Constraint, fix: &Constraint) -> Result<Self, FixError> {
        match fix {
            Constraint::Relation { op: RelOp::Eq, left: NumExpr::Feature(i), right } => {
                if right.features().contains(i) {
                    return Err(FixError::SelfReference(*i));
                }
                Ok(Self { guard, target: *i, expr: right.clone() })
            }
            _ => Err(FixError::NotAssignment),
        }
    }

    /// Rules for every assignment-form equality in `cs`, in set order. With a
    /// mutability mask, rules whose target is immutable are skipped.
    pub fn derive(cs: &ConstraintSet, mutable: Option<&[bool]>) -> Vec<FixRule> {
        cs.iter()
            .filter_map(|c| FixRule::new(c.clone(), c).ok())
            .filter(|r| mutable.is_none_or(|m| m.get(r.target).copied().unwrap_or(false)))
            .collect()
    }

    pub fn apply(&self, row: &mut [f64], cfg: &PenaltyConfig) -> bool {
        if penalty(&self.guard, row, cfg) > 0.0 {
            row[self.target] = evaluate_expr_with(&self.expr, row, &cfg.guards);
            true
        } else {
            false
        }
    }
}

/// Applies rules in order to one row; later rules see earlier repairs.
/// Returns how many assignments were made.
pub fn fix_row(rules: &[FixRule], row: &mut [f64], cfg: &PenaltyConfig) -> usize {
    rules.iter().filter(|r| r.apply(row, cfg)).count()
}

/// Repairs every row of `x`. Guards are tested at tolerance 0.
pub fn fix(rules: &[FixRule], x: &Matrix) -> Result<Matrix, EngineError> {
    let cfg = PenaltyConfig::default();
    for r in rules {
        let width = r.guard.features().into_iter().chain(r.expr.features()).chain([r.target]).max().map_or(0, |m| m + 1);
        if width > x.cols() {
            return Err(EngineError::Width { expected: width, got: x.cols() });
        }
    }
    let mut out = x.clone();
    for i in 0..out.rows() {
        fix_row(rules, out.row_mut(i), &cfg);
    }
    Ok(out)
}
