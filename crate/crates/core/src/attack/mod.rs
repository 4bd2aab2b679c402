//! Constrained evasion attacks.
//!
//! All attacks search in the model's scaled space, where distances and `eps`
//! are measured, and evaluate constraints on the corresponding raw rows.
//! [`AttackContext`] owns that plumbing: projection onto the feasible
//! perturbation set, repair with fix rules, and objective evaluation.
//!
//! - [`capgd`]: gradient ascent with momentum, step halving and constraint
//!   penalties.
//! - [`moeva`]: a multi-objective genetic search.
//! - [`caa`]: CAPGD first, MOEVA on whatever CAPGD could not break.

mod caa;
mod capgd;
mod moeva;
mod validate;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use caa::{caa, AttackResult, SampleResult, Stage};
pub use capgd::{capgd, CapgdOutcome};
pub use moeva::{moeva, MoevaOutcome};
pub use validate::{Validator, Violation, ViolationCounts};

use crate::dsl::{ConstraintSet, ValidationError};
use crate::engine::{fix_row, Compiled, FixRule, PenaltyConfig};
use crate::math;
use crate::metrics::classify;
use crate::model::Classifier;
use crate::scaler::MinMaxScaler;
use crate::schema::{DatasetSchema, FeatureKind};

/// Slack on the distance budget absorbing floating-point round-off.
pub const DISTANCE_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Linf,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }
}

/// Distance between two scaled vectors.
pub fn distance(norm: Norm, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    match norm {
        Norm::L2 => math::l2_norm(&d),
        Norm::Linf => math::linf_norm(&d),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackBudget {
    pub norm: Norm,
    /// Radius of the perturbation ball in scaled space.
    pub eps: f64,
    pub n_iter_gradient: usize,
    pub n_gen: usize,
    pub n_off: usize,
    pub n_pop: usize,
    pub seed: u64,
}

impl Default for AttackBudget {
    fn default() -> Self {
        Self { norm: Norm::L2, eps: 0.5, n_iter_gradient: 10, n_gen: 100, n_off: 100, n_pop: 200, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    #[serde(flatten)]
    pub budget: AttackBudget,
    /// Initial weight of the constraint penalty in the CAPGD objective.
    pub lambda: f64,
    pub tolerance: f64,
    pub strict_margin: f64,
    /// Momentum blend of CAPGD updates.
    pub alpha: f64,
    /// Fraction of improving iterations required to keep the step size.
    pub rho: f64,
    /// Decision threshold on the class-1 probability.
    pub threshold: f64,
    /// Standard deviation of MOEVA's Gaussian mutation; `eps / 10` if unset.
    pub mutation_sigma: Option<f64>,
    /// Per-unit mutation probability; one over the number of mutable units if unset.
    pub mutation_rate: Option<f64>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            budget: AttackBudget::default(),
            lambda: 0.5,
            tolerance: 1e-2,
            strict_margin: 1e-6,
            alpha: 0.75,
            rho: 0.75,
            threshold: 0.5,
            mutation_sigma: None,
            mutation_rate: None,
        }
    }
}

impl AttackConfig {
    pub fn penalty_config(&self) -> PenaltyConfig {
        PenaltyConfig { tolerance: self.tolerance, strict_margin: self.strict_margin, ..PenaltyConfig::default() }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let b = &self.budget;
        let bad = |what| Err(AttackError::Config(what));
        if !(b.eps >= 0.0 && b.eps.is_finite()) {
            return bad("eps must be finite and nonnegative");
        }
        if b.n_iter_gradient == 0 {
            return bad("n_iter_gradient must be positive");
        }
        if b.n_pop == 0 || b.n_off == 0 {
            return bad("n_pop and n_off must be positive");
        }
        if !(self.lambda >= 0.0) || !(self.tolerance >= 0.0) || !(self.strict_margin >= 0.0) {
            return bad("lambda, tolerance and strict_margin must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.rho) {
            return bad("alpha and rho must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must be in [0, 1]");
        }
        if self.mutation_sigma.is_some_and(|s| !(s >= 0.0)) || self.mutation_rate.is_some_and(|r| !(0.0..=1.0).contains(&r)) {
            return bad("mutation_sigma must be nonnegative and mutation_rate in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    Config(&'static str),
    #[error("width mismatch: expected {expected} features, got {got}")]
    Width { expected: usize, got: usize },
    #[error("constraint {index}: {error}")]
    Constraint { index: usize, error: ValidationError },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
}

/// Checkpoint iterations at which CAPGD reconsiders its step size.
///
/// Fractions start at 0 and 0.22 and grow by the previous gap minus 0.03,
/// never by less than 0.06. Each is scaled by `n_iter`, rounded up, capped
/// at `n_iter` and deduplicated.
pub fn checkpoint_schedule(n_iter: usize) -> Vec<usize> {
    let n = n_iter as f64;
    let mut out = vec![0];
    let (mut prev, mut cur) = (0.0f64, 0.22f64);
    loop {
        // Fractions carry two decimals; rounding first keeps 0.7 * 10 at 7.
        let w = (math::ceil(math::round(cur * 100.0) * n / 100.0) as usize).min(n_iter);
        if out.last() != Some(&w) {
            out.push(w);
        }
        if w >= n_iter {
            return out;
        }
        let next = cur + (cur - prev - 0.03).max(0.06);
        prev = cur;
        cur = next;
    }
}

/// A point visited by an attack: scaled coordinates and the raw row they encode.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub z: Vec<f64>,
    pub raw: Vec<f64>,
}

/// Shared, read-only state of an attack against one model.
pub struct AttackContext<'a, C: Classifier> {
    pub model: &'a C,
    pub scaler: &'a MinMaxScaler,
    pub schema: &'a DatasetSchema,
    pub constraints: &'a ConstraintSet,
    pub config: AttackConfig,
    penalty_cfg: PenaltyConfig,
    compiled: Compiled,
    rules: Vec<FixRule>,
    mutable: Vec<bool>,
    discrete: Vec<bool>,
    groups: Vec<Vec<usize>>,
    validator: Validator<'a>,
}

impl<'a, C: Classifier> AttackContext<'a, C> {
    pub fn new(
        model: &'a C,
        scaler: &'a MinMaxScaler,
        schema: &'a DatasetSchema,
        constraints: &'a ConstraintSet,
        config: AttackConfig,
    ) -> Result<Self, AttackError> {
        config.validate()?;
        let n = schema.n_features();
        for got in [model.n_features(), scaler.n_features()] {
            if got != n {
                return Err(AttackError::Width { expected: n, got });
            }
        }
        constraints.validate(n).map_err(|(index, error)| AttackError::Constraint { index, error })?;
        let mutable = schema.mutable_mask();
        let penalty_cfg = config.penalty_config();
        Ok(Self {
            model,
            scaler,
            schema,
            constraints,
            compiled: Compiled::new(constraints),
            rules: FixRule::derive(constraints, Some(&mutable)),
            discrete: schema.features.iter().map(|f| f.kind != FeatureKind::Continuous).collect(),
            groups: schema.onehot_groups().into_iter().map(|(_, cols)| cols).collect(),
            mutable,
            validator: Validator::new(schema, constraints, scaler, penalty_cfg, config.budget.norm, config.budget.eps),
            penalty_cfg,
            config,
        })
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn eps(&self) -> f64 {
        self.config.budget.eps
    }

    pub fn norm(&self) -> Norm {
        self.config.budget.norm
    }

    pub fn penalty_config(&self) -> &PenaltyConfig {
        &self.penalty_cfg
    }

    pub fn mutable(&self) -> &[bool] {
        &self.mutable
    }

    pub(crate) fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub(crate) fn is_discrete(&self, j: usize) -> bool {
        self.discrete[j]
    }

    pub(crate) fn in_group(&self, j: usize) -> bool {
        self.schema.features[j].onehot_group.is_some()
    }

    pub fn validator(&self) -> &Validator<'a> {
        &self.validator
    }

    pub(crate) fn compiled(&self) -> &Compiled {
        &self.compiled
    }

    pub fn origin(&self, raw: &[f64]) -> Point {
        Point { z: self.scaler.transform_row(raw), raw: raw.to_vec() }
    }

    /// Whether the model's decision on scaled `z` differs from `y`.
    pub fn misclassified(&self, z: &[f64], y: u8) -> bool {
        classify(self.model.proba(z)[1], self.config.threshold) != y
    }

    pub fn total_penalty(&self, raw: &[f64]) -> f64 {
        self.compiled.total(raw, &self.penalty_cfg)
    }

    /// Projects a scaled candidate around `orig`:
    ///
    /// 1. immutable coordinates are reset to `orig`;
    /// 2. coordinates are clipped to `[0, 1]`;
    /// 3. the perturbation is projected onto the `eps` ball;
    /// 4. integer features are rounded in raw units, toward `orig` if the
    ///    nearest value leaves the ball;
    /// 5. one-hot groups are snapped to their largest entry, or reset to
    ///    `orig` if that leaves the ball.
    pub fn project(&self, z: &[f64], orig: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = z
            .iter()
            .zip(orig)
            .zip(&self.mutable)
            .map(|((&v, &o), &m)| if m { v.clamp(0.0, 1.0) } else { o })
            .collect();
        self.project_ball(&mut out, orig);
        self.round_discrete(&mut out, orig);
        out
    }

    fn project_ball(&self, z: &mut [f64], orig: &[f64]) {
        let eps = self.eps();
        match self.norm() {
            Norm::Linf => {
                for (v, &o) in z.iter_mut().zip(orig) {
                    *v = v.clamp(o - eps, o + eps);
                }
            }
            Norm::L2 => {
                let d = distance(Norm::L2, z, orig);
                if d > eps {
                    let t = if d > 0.0 { eps / d } else { 0.0 };
                    for (v, &o) in z.iter_mut().zip(orig) {
                        *v = o + t * (*v - o);
                    }
                }
            }
        }
    }

    fn round_discrete(&self, z: &mut [f64], orig: &[f64]) {
        let eps = self.eps() + DISTANCE_SLACK;
        let integer_cols = || (0..z.len()).filter(|&j| self.mutable[j] && self.discrete[j] && !self.in_group(j));
        let nearest: Vec<(usize, f64)> = integer_cols().map(|j| (j, self.round_integer(j, z[j], None))).collect();
        let toward: Vec<(usize, f64)> = integer_cols().map(|j| (j, self.round_integer(j, z[j], Some(orig[j])))).collect();
        for &(j, v) in &nearest {
            z[j] = v;
        }
        if distance(self.norm(), z, orig) > eps {
            for &(j, v) in &toward {
                z[j] = v;
            }
        }
        for cols in &self.groups {
            if !self.mutable[cols[0]] {
                continue;
            }
            let saved: Vec<f64> = cols.iter().map(|&j| z[j]).collect();
            let mut best = 0;
            for (k, &v) in saved.iter().enumerate() {
                if v > saved[best] {
                    best = k;
                }
            }
            for (k, &j) in cols.iter().enumerate() {
                z[j] = if k == best { 1.0 } else { 0.0 };
            }
            if distance(self.norm(), z, orig) > eps {
                for &j in cols {
                    z[j] = orig[j];
                }
            }
        }
    }

    /// Rounds scaled coordinate `j` to a scaled integer value within bounds,
    /// to the nearest one or toward the scaled value `toward`.
    fn round_integer(&self, j: usize, z: f64, toward: Option<f64>) -> f64 {
        let f = &self.schema.features[j];
        let raw = self.scaler.unscale_value(j, z);
        let rounded = match toward.map(|t| self.scaler.unscale_value(j, t)) {
            None => math::round(raw),
            Some(t) if raw > t => math::floor(raw),
            Some(_) => math::ceil(raw),
        };
        let lo = math::ceil(f.min);
        let hi = math::floor(f.max);
        self.scaler.scale_value(j, rounded.clamp(lo, hi))
    }

    /// Raw row encoded by scaled `z`: immutable values are copied from
    /// `orig_raw`, discrete values rounded, everything clipped to bounds.
    pub fn to_raw(&self, z: &[f64], orig_raw: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| {
                if !self.mutable[j] {
                    return orig_raw[j];
                }
                let f = &self.schema.features[j];
                let mut r = self.scaler.unscale_value(j, v);
                if self.discrete[j] {
                    r = math::round(r);
                }
                r.clamp(f.min, f.max)
            })
            .collect()
    }

    /// Projects, repairs with fix rules, and shrinks the perturbation back
    /// into the ball if the repair pushed it out.
    pub fn repair(&self, z: &[f64], orig: &Point) -> Point {
        let projected = self.project(z, &orig.z);
        let mut raw = self.to_raw(&projected, &orig.raw);
        if !self.rules.is_empty() {
            fix_row(&self.rules, &mut raw, &self.penalty_cfg);
        }
        let mut z = self.scaler.transform_row(&raw);
        let eps = self.eps();
        let d = distance(self.norm(), &z, &orig.z);
        if d > eps {
            let t = eps / d * (1.0 - 1e-12);
            for (v, &o) in z.iter_mut().zip(&orig.z) {
                *v = o + t * (*v - o);
            }
            self.round_discrete(&mut z, &orig.z);
            raw = self.to_raw(&z, &orig.raw);
        }
        Point { z: self.scaler.transform_row(&raw), raw }
    }
}
