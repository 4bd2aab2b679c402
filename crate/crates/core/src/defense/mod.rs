//! Defenses: tabular Cutmix augmentation and constrained adversarial training.

mod at;

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use at::{adversarial_train, clean_drop_warning, ATConfig};

use crate::dsl::ConstraintSet;
use crate::engine::{check_row, fix_row, FixRule, PenaltyConfig};
use crate::math;
use crate::matrix::Matrix;
use crate::schema::{DataError, Dataset, DatasetSchema};

/// Mixtures are redrawn this many times before a pair is skipped.
pub const MAX_CUTMIX_RETRIES: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMethod {
    #[default]
    None,
    Cutmix,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub method: AugmentMethod,
    /// Synthetic rows to add, as a fraction of the original row count.
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub emitted: usize,
    /// Pairs abandoned after [`MAX_CUTMIX_RETRIES`] invalid mixtures.
    pub skipped: usize,
}

/// Combines two rows by a coordinate mask (`true` takes `xa`); one-hot
/// groups follow the mask of their first column. The label is `ya` when at
/// least half of the coordinates come from `xa`.
pub fn cutmix_with_mask(schema: &DatasetSchema, xa: &[f64], ya: u8, xb: &[f64], yb: u8, mask: &[bool]) -> (Vec<f64>, u8) {
    let mut take = mask.to_vec();
    for (_, cols) in schema.onehot_groups() {
        let first = take[cols[0]];
        for &j in &cols {
            take[j] = first;
        }
    }
    let x: Vec<f64> = (0..xa.len()).map(|j| if take[j] { xa[j] } else { xb[j] }).collect();
    let from_a = take.iter().filter(|&&t| t).count();
    let y = if 2 * from_a >= take.len() { ya } else { yb };
    (x, y)
}

/// Shared state for drawing valid Cutmix mixtures.
pub struct Cutmix<'a> {
    schema: &'a DatasetSchema,
    constraints: &'a ConstraintSet,
    rules: Vec<FixRule>,
    penalty_cfg: PenaltyConfig,
}

impl<'a> Cutmix<'a> {
    pub fn new(schema: &'a DatasetSchema, constraints: &'a ConstraintSet, penalty_cfg: PenaltyConfig) -> Self {
        Self { schema, constraints, rules: FixRule::derive(constraints, None), penalty_cfg }
    }

    /// Whether a row satisfies the schema and every constraint.
    pub fn is_valid(&self, x: &[f64]) -> bool {
        self.schema.row_violation(x).is_none() && check_row(self.constraints, x, &self.penalty_cfg)
    }

    /// Draws a mask with a per-pair share `p ~ U(0, 1)` from `xa`, mixes,
    /// repairs with fix rules, and retries until the result is valid.
    pub fn mix(&self, xa: &[f64], ya: u8, xb: &[f64], yb: u8, rng: &mut ChaCha8Rng) -> Option<(Vec<f64>, u8)> {
        for _ in 0..MAX_CUTMIX_RETRIES {
            let p: f64 = rng.random();
            let mask: Vec<bool> = (0..xa.len()).map(|_| rng.random::<f64>() < p).collect();
            let (mut x, y) = cutmix_with_mask(self.schema, xa, ya, xb, yb, &mask);
            if !self.rules.is_empty() {
                fix_row(&self.rules, &mut x, &self.penalty_cfg);
            }
            if self.is_valid(&x) {
                return Some((x, y));
            }
        }
        None
    }
}

/// One seeded Cutmix mixture of two rows, or `None` after
/// [`MAX_CUTMIX_RETRIES`] invalid draws.
#[allow(clippy::too_many_arguments)]
pub fn cutmix_tabular(
    schema: &DatasetSchema,
    constraints: &ConstraintSet,
    penalty_cfg: PenaltyConfig,
    xa: &[f64],
    ya: u8,
    xb: &[f64],
    yb: u8,
    seed: u64,
) -> Option<(Vec<f64>, u8)> {
    Cutmix::new(schema, constraints, penalty_cfg).mix(xa, ya, xb, yb, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Appends `round(ratio * n)` Cutmix rows mixed from random pairs of `data`.
pub fn augment(
    data: &Dataset,
    schema: &DatasetSchema,
    constraints: &ConstraintSet,
    penalty_cfg: PenaltyConfig,
    cfg: &AugmentConfig,
) -> Result<(Dataset, AugmentStats), DataError> {
    data.validate(schema)?;
    let mut stats = AugmentStats::default();
    if cfg.method == AugmentMethod::None || !(cfg.ratio > 0.0) {
        return Ok((data.clone(), stats));
    }
    let mixer = Cutmix::new(schema, constraints, penalty_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let target = math::round(cfg.ratio * data.len() as f64) as usize;
    let mut out = data.clone();
    for _ in 0..target {
        let a = rng.random_range(0..data.len());
        let b = rng.random_range(0..data.len());
        match mixer.mix(data.x.row(a), data.y[a], data.x.row(b), data.y[b], &mut rng) {
            Some((x, y)) => {
                out.x.push_row(&x);
                out.y.push(y);
                stats.emitted += 1;
            }
            None => stats.skipped += 1,
        }
    }
    Ok((out, stats))
}

/// Keeps the rows of externally generated data that satisfy the schema and
/// constraints; returns them with the number rejected.
pub fn filter_valid_rows(
    data: &Dataset,
    schema: &DatasetSchema,
    constraints: &ConstraintSet,
    penalty_cfg: &PenaltyConfig,
) -> (Dataset, usize) {
    let keep: Vec<usize> = (0..data.len())
        .filter(|&i| {
            data.y[i] <= 1 && schema.row_violation(data.x.row(i)).is_none() && check_row(constraints, data.x.row(i), penalty_cfg)
        })
        .collect();
    let rejected = data.len() - keep.len();
    (data.subset(&keep), rejected)
}

/// Rows of `a` followed by rows of `b`.
pub fn concat(a: &Dataset, b: &Dataset) -> Result<Dataset, DataError> {
    if a.n_features() != b.n_features() {
        return Err(DataError::Width { expected: a.n_features(), got: b.n_features() });
    }
    let mut x = Matrix::zeros(0, a.n_features());
    for row in a.x.iter_rows().chain(b.x.iter_rows()) {
        x.push_row(row);
    }
    let y = a.y.iter().chain(&b.y).copied().collect();
    Dataset::new(x, y)
}
