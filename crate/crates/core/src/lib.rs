//! Constrained adversarial robustness for tabular classifiers.
//!
//! This crate is `no_std` (with `alloc`) and holds every algorithmic piece of
//! the engine:
//!
//! - [`dsl`]: the constraint expression language (AST, parser, formatter).
//! - [`engine`]: evaluation, penalties, checking, repair and reverse-mode
//!   gradients of constraints.
//! - [`schema`], [`scaler`], [`model`], [`metrics`], [`synth`]: tabular data,
//!   the reference MLP classifier and its training loop.
//! - [`attack`]: CAPGD, MOEVA and their CAA ensemble.
//! - [`defense`]: constrained adversarial training and tabular Cutmix.
//! - [`bench`]: the evaluation protocol, budget sweeps and report types.
//!
//! File formats, threads and the command line live in the `tabrobust` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attack;
pub mod bench;
pub mod defense;
pub mod dsl;
pub mod engine;
pub mod exec;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod scaler;
pub mod schema;
pub mod synth;

pub use dsl::{Constraint, ConstraintSet, NumExpr, RelOp};
pub use matrix::Matrix;
pub use schema::{Dataset, DatasetSchema, FeatureKind, FeatureMetadata};
