//! The constraint expression language.
//!
//! Constraints relate features of a single row with arithmetic, relational
//! and boolean operators. Text is parsed against a [`DatasetSchema`] so that
//! feature names resolve to column indices once, at parse time.
//!
//! ```text
//! F0 == F1 + F2
//! if F1 > 0 then F4 > 0
//! log(income) - 2 * debt >= min(F3, 10)
//! ```
//!
//! [`DatasetSchema`]: crate::schema::DatasetSchema

mod format;
mod parser;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use format::{format_constraint, format_constraint_named, format_expr};
pub use parser::{parse_constraint, parse_constraint_file, ParseError, ParseErrorKind};

/// Arithmetic expression over the features of one row.
#[derive(Clone, Debug, PartialEq)]
pub enum NumExpr {
    Const(f64),
    Feature(usize),
    Add(Box<NumExpr>, Box<NumExpr>),
    Sub(Box<NumExpr>, Box<NumExpr>),
    Mul(Box<NumExpr>, Box<NumExpr>),
    /// Division with a guarded denominator, see [`crate::engine::ExprGuards`].
    Div(Box<NumExpr>, Box<NumExpr>),
    Pow(Box<NumExpr>, Box<NumExpr>),
    /// Natural log of `max(arg, floor)`.
    Log(Box<NumExpr>),
    Abs(Box<NumExpr>),
    Min(Vec<NumExpr>),
    Max(Vec<NumExpr>),
}

impl NumExpr {
    pub fn feature(i: usize) -> Self {
        NumExpr::Feature(i)
    }

    pub fn constant(v: f64) -> Self {
        NumExpr::Const(v)
    }

    pub fn pow(self, exponent: NumExpr) -> Self {
        NumExpr::Pow(Box::new(self), Box::new(exponent))
    }

    pub fn log(self) -> Self {
        NumExpr::Log(Box::new(self))
    }

    pub fn abs(self) -> Self {
        NumExpr::Abs(Box::new(self))
    }

    pub fn eq(self, rhs: NumExpr) -> Constraint {
        Constraint::relation(RelOp::Eq, self, rhs)
    }

    pub fn le(self, rhs: NumExpr) -> Constraint {
        Constraint::relation(RelOp::Le, self, rhs)
    }

    pub fn lt(self, rhs: NumExpr) -> Constraint {
        Constraint::relation(RelOp::Lt, self, rhs)
    }

    pub fn ge(self, rhs: NumExpr) -> Constraint {
        Constraint::relation(RelOp::Ge, self, rhs)
    }

    pub fn gt(self, rhs: NumExpr) -> Constraint {
        Constraint::relation(RelOp::Gt, self, rhs)
    }

    /// Calls `f` on every feature index, left to right.
    pub fn visit_features(&self, f: &mut impl FnMut(usize)) {
        match self {
            NumExpr::Const(_) => {}
            NumExpr::Feature(i) => f(*i),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) | NumExpr::Div(a, b) | NumExpr::Pow(a, b) => {
                a.visit_features(f);
                b.visit_features(f);
            }
            NumExpr::Log(a) | NumExpr::Abs(a) => a.visit_features(f),
            NumExpr::Min(args) | NumExpr::Max(args) => args.iter().for_each(|a| a.visit_features(f)),
        }
    }

    pub fn features(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit_features(&mut |i| {
            out.insert(i);
        });
        out
    }

    fn validate(&self, n_features: usize) -> Result<(), ValidationError> {
        match self {
            NumExpr::Const(v) if !v.is_finite() => Err(ValidationError::NonFiniteConstant),
            NumExpr::Const(_) => Ok(()),
            NumExpr::Feature(i) if *i >= n_features => Err(ValidationError::UnknownFeature(*i)),
            NumExpr::Feature(_) => Ok(()),
            NumExpr::Add(a, b) | NumExpr::Sub(a, b) | NumExpr::Mul(a, b) | NumExpr::Div(a, b) | NumExpr::Pow(a, b) => {
                a.validate(n_features)?;
                b.validate(n_features)
            }
            NumExpr::Log(a) | NumExpr::Abs(a) => a.validate(n_features),
            NumExpr::Min(args) | NumExpr::Max(args) => {
                if args.is_empty() {
                    return Err(ValidationError::EmptyArgs);
                }
                args.iter().try_for_each(|a| a.validate(n_features))
            }
        }
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl core::ops::$tr for NumExpr {
            type Output = NumExpr;
            fn $method(self, rhs: NumExpr) -> NumExpr {
                NumExpr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}
binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelOp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl RelOp {
    /// The relation satisfied exactly when `self` is not. `Eq` has none.
    pub fn negate(self) -> Option<RelOp> {
        match self {
            RelOp::Eq => None,
            RelOp::Le => Some(RelOp::Gt),
            RelOp::Lt => Some(RelOp::Ge),
            RelOp::Ge => Some(RelOp::Lt),
            RelOp::Gt => Some(RelOp::Le),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "==",
            RelOp::Le => "<=",
            RelOp::Lt => "<",
            RelOp::Ge => ">=",
            RelOp::Gt => ">",
        }
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Constraint {
    Relation { op: RelOp, left: NumExpr, right: NumExpr },
    And(Vec<Constraint>),
    Or(Vec<Constraint>),
    /// `guard` must be a non-equality relation.
    Implies { guard: Box<Constraint>, body: Box<Constraint> },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("feature index {0} is not in the schema")]
    UnknownFeature(usize),
    #[error("constant is not finite")]
    NonFiniteConstant,
    #[error("min/max/and/or need at least one argument")]
    EmptyArgs,
    #[error("implication guard must be a single inequality relation")]
    BadGuard,
}

impl Constraint {
    pub fn relation(op: RelOp, left: NumExpr, right: NumExpr) -> Self {
        Constraint::Relation { op, left, right }
    }

    pub fn implies(guard: Constraint, body: Constraint) -> Self {
        Constraint::Implies { guard: Box::new(guard), body: Box::new(body) }
    }

    pub fn features(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit_features(&mut |i| {
            out.insert(i);
        });
        out
    }

    pub fn visit_features(&self, f: &mut impl FnMut(usize)) {
        match self {
            Constraint::Relation { left, right, .. } => {
                left.visit_features(f);
                right.visit_features(f);
            }
            Constraint::And(cs) | Constraint::Or(cs) => cs.iter().for_each(|c| c.visit_features(f)),
            Constraint::Implies { guard, body } => {
                guard.visit_features(f);
                body.visit_features(f);
            }
        }
    }

    /// Checks that every feature resolves against a schema of `n_features`
    /// columns and that the tree is well formed.
    pub fn validate(&self, n_features: usize) -> Result<(), ValidationError> {
        match self {
            Constraint::Relation { left, right, .. } => {
                left.validate(n_features)?;
                right.validate(n_features)
            }
            Constraint::And(cs) | Constraint::Or(cs) => {
                if cs.is_empty() {
                    return Err(ValidationError::EmptyArgs);
                }
                cs.iter().try_for_each(|c| c.validate(n_features))
            }
            Constraint::Implies { guard, body } => match guard.as_ref() {
                Constraint::Relation { op, .. } if op.negate().is_some() => {
                    guard.validate(n_features)?;
                    body.validate(n_features)
                }
                _ => Err(ValidationError::BadGuard),
            },
        }
    }
}

/// Feature indices referenced anywhere in `c`.
pub fn features_of(c: &Constraint) -> BTreeSet<usize> {
    c.features()
}

/// Ordered list of constraints, optionally with the text each came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
    pub source_text: Vec<Option<String>>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        let source_text = constraints.iter().map(|_| None).collect();
        Self { constraints, source_text }
    }

    pub fn push(&mut self, c: Constraint, source: Option<String>) {
        self.constraints.push(c);
        self.source_text.push(source);
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Constraint> {
        self.constraints.iter()
    }

    pub fn validate(&self, n_features: usize) -> Result<(), (usize, ValidationError)> {
        for (i, c) in self.constraints.iter().enumerate() {
            c.validate(n_features).map_err(|e| (i, e))?;
        }
        Ok(())
    }
}
