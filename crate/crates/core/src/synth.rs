//! Synthetic constrained tabular datasets.
//!
//! Column layout (names are `F0`, `F1`, ...):
//!
//! | column | kind | range | role |
//! |---|---|---|---|
//! | F0 | continuous | [-1, 2] | `F1 + F2` under the sum templates |
//! | F1 | continuous | [-1, 1] | guard of the implication |
//! | F2 | continuous | [0, 1] | |
//! | F3 | continuous | [0, 1] | |
//! | F4 | continuous | [-1, 1] | positive whenever `F1 > 0` under the implication templates |
//! | F5.. | continuous | [0, 1] | extras |
//! | then | integer | [0, 10] | `n_integer` columns |
//! | last | categorical | {0, 1} | one one-hot group of `onehot_width` columns |
//!
//! Labels threshold a hidden score mixing immutable and mutable columns and
//! are flipped with probability `label_noise`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_constraint, ConstraintSet};
use crate::matrix::Matrix;
use crate::schema::{Dataset, DatasetSchema, FeatureMetadata};

/// Columns reserved for the template.
pub const TEMPLATE_COLUMNS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// `F0 == F1 + F2`
    Sum3,
    /// `if F1 > 0 then F4 > 0`
    Implication,
    /// Both of the above.
    Sum3Implication,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::Sum3 => "sum3",
            Template::Implication => "implication",
            Template::Sum3Implication => "sum3-implication",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Template::Sum3, Template::Implication, Template::Sum3Implication].into_iter().find(|t| t.name() == s)
    }

    fn has_sum(self) -> bool {
        matches!(self, Template::Sum3 | Template::Sum3Implication)
    }

    fn has_implication(self) -> bool {
        matches!(self, Template::Implication | Template::Sum3Implication)
    }

    pub fn constraint_text(self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.has_sum() {
            out.push("F0 == F1 + F2");
        }
        if self.has_implication() {
            out.push("if F1 > 0 then F4 > 0");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub n_features: usize,
    pub template: Template,
    pub immutable: Vec<usize>,
    pub n_integer: usize,
    /// Width of the trailing one-hot group; 0 for none.
    pub onehot_width: usize,
    pub label_noise: f64,
    /// Weight of the immutable columns F3 and F5 in the hidden score.
    pub immutable_weight: f64,
    /// Weight of the mutable columns F1, F2 and F4 in the hidden score.
    pub mutable_weight: f64,
    pub critical_class: u8,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_rows: 5000,
            n_features: 10,
            template: Template::Sum3Implication,
            immutable: alloc::vec![3, 5],
            n_integer: 1,
            onehot_width: 2,
            label_noise: 0.01,
            immutable_weight: 3.0,
            mutable_weight: 1.0,
            critical_class: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("n_rows must be positive")]
    NoRows,
    #[error("{n_features} features cannot hold {needed} template, integer and one-hot columns")]
    TooFewFeatures { n_features: usize, needed: usize },
    #[error("immutable column {0} is out of range")]
    BadImmutable(usize),
    #[error("a one-hot group needs at least 2 columns")]
    BadOneHot,
    #[error("label_noise must be in [0, 0.5)")]
    BadNoise,
    #[error("critical class must be 0 or 1")]
    BadCriticalClass,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub schema: DatasetSchema,
    pub data: Dataset,
    pub constraints: ConstraintSet,
}

/// Generates a dataset whose every row satisfies its constraint set exactly.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Synthetic, SynthError> {
    if spec.n_rows == 0 {
        return Err(SynthError::NoRows);
    }
    let needed = TEMPLATE_COLUMNS + spec.n_integer + spec.onehot_width;
    if spec.n_features < needed {
        return Err(SynthError::TooFewFeatures { n_features: spec.n_features, needed });
    }
    if spec.onehot_width == 1 {
        return Err(SynthError::BadOneHot);
    }
    if !(0.0..0.5).contains(&spec.label_noise) {
        return Err(SynthError::BadNoise);
    }
    if spec.critical_class > 1 {
        return Err(SynthError::BadCriticalClass);
    }
    if let Some(&bad) = spec.immutable.iter().find(|&&j| j >= spec.n_features) {
        return Err(SynthError::BadImmutable(bad));
    }

    let n = spec.n_features;
    let first_int = n - spec.onehot_width - spec.n_integer;
    let first_cat = n - spec.onehot_width;
    let name = |j: usize| -> String { format!("F{j}") };
    let features: Vec<FeatureMetadata> = (0..n)
        .map(|j| {
            let f = match j {
                0 => FeatureMetadata::continuous(name(j), -1.0, 2.0),
                1 | 4 => FeatureMetadata::continuous(name(j), -1.0, 1.0),
                j if j >= first_cat => FeatureMetadata::categorical(name(j), 0),
                j if j >= first_int => FeatureMetadata::integer(name(j), 0.0, 10.0),
                _ => FeatureMetadata::continuous(name(j), 0.0, 1.0),
            };
            if spec.immutable.contains(&j) { f.immutable() } else { f }
        })
        .collect();
    let schema = DatasetSchema::new(features, spec.critical_class).expect("generated schema is valid");

    let mut constraints = ConstraintSet::default();
    for text in spec.template.constraint_text() {
        let c = parse_constraint(text, &schema).expect("template constraints parse");
        constraints.push(c, Some(text.into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(0, n);
    let mut y = Vec::with_capacity(spec.n_rows);
    let mut row = alloc::vec![0.0; n];
    for _ in 0..spec.n_rows {
        for (j, v) in row.iter_mut().enumerate() {
            *v = match j {
                1 | 4 => rng.random_range(-1.0..1.0),
                j if j >= first_cat => 0.0,
                j if j >= first_int => rng.random_range(0..=10u32) as f64,
                _ => rng.random_range(0.0..1.0),
            };
        }
        if spec.template.has_sum() {
            row[0] = row[1] + row[2];
        } else {
            row[0] = rng.random_range(-1.0..2.0);
        }
        if spec.template.has_implication() && row[1] > 0.0 {
            row[4] = rng.random_range(0.01..1.0);
        }
        let category = if spec.onehot_width > 0 {
            let c = rng.random_range(0..spec.onehot_width);
            row[first_cat + c] = 1.0;
            Some(c)
        } else {
            None
        };

        let extra = if first_int > TEMPLATE_COLUMNS + 1 { row[6] - 0.5 } else { 0.0 };
        let integer = if spec.n_integer > 0 { row[first_int] / 10.0 - 0.5 } else { 0.0 };
        let immutable = (row[3] - 0.5) + if n > TEMPLATE_COLUMNS { row[5] - 0.5 } else { 0.0 };
        let mutable = 0.5 * row[1] + (row[2] - 0.5) + 0.25 * row[4];
        let cat = category.map_or(0.0, |c| if c == 0 { 0.25 } else { -0.25 });
        let score = spec.immutable_weight * immutable + spec.mutable_weight * mutable + 0.5 * integer + 0.5 * extra * extra + cat - 0.02;
        let mut label = u8::from(score > 0.0);
        if rng.random::<f64>() < spec.label_noise {
            label ^= 1;
        }
        x.push_row(&row);
        y.push(label);
    }
    let data = Dataset::new(x, y).expect("labels match rows");
    Ok(Synthetic { schema, data, constraints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{check, PenaltyConfig};

    #[test]
    fn rows_satisfy_constraints_exactly() {
        for t in [Template::Sum3, Template::Implication, Template::Sum3Implication] {
            let spec = SyntheticSpec { n_rows: 2000, template: t, ..Default::default() };
            let s = generate_synthetic(&spec, 7).unwrap();
            let ok = check(&s.constraints, &s.data.x, &PenaltyConfig::with_tolerance(0.0)).unwrap();
            assert!(ok.iter().all(|&b| b), "{t:?}");
            s.data.validate(&s.schema).unwrap();
        }
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec { n_rows: 300, ..Default::default() };
        assert_eq!(generate_synthetic(&spec, 7).unwrap(), generate_synthetic(&spec, 7).unwrap());
        assert_ne!(generate_synthetic(&spec, 7).unwrap().data, generate_synthetic(&spec, 8).unwrap().data);
    }

    #[test]
    fn flags_and_balance() {
        let s = generate_synthetic(&SyntheticSpec::default(), 1).unwrap();
        assert_eq!(s.schema.mutable_mask(), [true, true, true, false, true, false, true, true, true, true]);
        let pos = s.data.y.iter().filter(|&&v| v == 1).count() as f64 / s.data.len() as f64;
        assert!((0.35..0.65).contains(&pos), "positive rate {pos}");
        assert_eq!(s.constraints.source_text[1].as_deref(), Some("if F1 > 0 then F4 > 0"));
    }

    #[test]
    fn infeasible_specs() {
        let base = SyntheticSpec::default();
        assert_eq!(generate_synthetic(&SyntheticSpec { n_rows: 0, ..base.clone() }, 0), Err(SynthError::NoRows));
        assert!(matches!(generate_synthetic(&SyntheticSpec { n_features: 6, ..base.clone() }, 0), Err(SynthError::TooFewFeatures { .. })));
        assert_eq!(generate_synthetic(&SyntheticSpec { immutable: alloc::vec![12], ..base.clone() }, 0), Err(SynthError::BadImmutable(12)));
        assert_eq!(generate_synthetic(&SyntheticSpec { n_features: 11, onehot_width: 1, ..base.clone() }, 0), Err(SynthError::BadOneHot));
        assert_eq!(generate_synthetic(&SyntheticSpec { label_noise: 0.7, ..base }, 0), Err(SynthError::BadNoise));
    }

    #[test]
    fn minimal_width() {
        let spec = SyntheticSpec { n_features: 5, n_integer: 0, onehot_width: 0, immutable: alloc::vec![3], ..Default::default() };
        let s = generate_synthetic(&spec, 2).unwrap();
        assert_eq!(s.data.n_features(), 5);
    }
}
