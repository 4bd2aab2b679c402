use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::attack::{capgd, AttackBudget, AttackConfig, AttackContext};
use crate::dsl::ConstraintSet;
use crate::engine::check_row;
use crate::exec::Executor;
use crate::math;
use crate::matrix::Matrix;
use crate::model::{fit_with_hook, BatchHook, History, ReferenceModel, TrainConfig, TrainError};
use crate::scaler::MinMaxScaler;
use crate::schema::{Dataset, DatasetSchema};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ATConfig {
    /// CAPGD settings of the inner attack; only the gradient stage runs.
    pub inner: AttackConfig,
    /// Fraction of each batch left clean.
    pub replay: f64,
    /// Largest tolerated clean-accuracy drop versus standard training.
    pub max_clean_drop: f64,
}

impl Default for ATConfig {
    fn default() -> Self {
        Self {
            inner: AttackConfig { budget: AttackBudget { n_iter_gradient: 5, ..AttackBudget::default() }, ..AttackConfig::default() },
            replay: 0.5,
            max_clean_drop: 0.05,
        }
    }
}

struct AdversarialBatches<'a, E: Executor> {
    data: &'a Dataset,
    schema: &'a DatasetSchema,
    constraints: &'a ConstraintSet,
    cfg: &'a ATConfig,
    exec: &'a E,
}

impl<E: Executor> BatchHook for AdversarialBatches<'_, E> {
    fn transform(&mut self, model: &ReferenceModel, rows: &[usize], batch: &mut Matrix, labels: &[u8]) -> Result<(), TrainError> {
        let n_adv = math::round((1.0 - self.cfg.replay) * rows.len() as f64) as usize;
        if n_adv == 0 || self.cfg.inner.budget.eps == 0.0 {
            return Ok(());
        }
        let scaler = model.scaler().map_err(|e| TrainError::Hook(e.to_string()))?;
        let ctx = AttackContext::new(model, scaler, self.schema, self.constraints, self.cfg.inner.clone())
            .map_err(|e| TrainError::Hook(e.to_string()))?;
        let candidates: Vec<Option<Vec<f64>>> = self.exec.map(n_adv, |k| {
            let x = self.data.x.row(rows[k]);
            let out = capgd(&ctx, x, labels[k]);
            let validator = ctx.validator();
            if out.success && validator.is_valid(x, &out.point.raw) {
                Some(out.point.raw)
            } else if validator.is_valid(x, &out.strongest.raw) {
                Some(out.strongest.raw)
            } else {
                None
            }
        });
        for (k, cand) in candidates.into_iter().enumerate() {
            if let Some(raw) = cand {
                assert!(ctx.validator().is_valid(self.data.x.row(rows[k]), &raw), "adversarial row violates constraints");
                batch.row_mut(k).copy_from_slice(&scaler.transform_row(&raw));
            }
        }
        Ok(())
    }
}

/// Trains with part of every mini-batch replaced by CAPGD candidates
/// against the current weights. Candidates that fail validation are
/// replaced by their clean rows.
///
/// Every row of `data` must satisfy the schema and constraints. A model
/// without a scaler gets one mapping the schema bounds onto `[0, 1]`.
pub fn adversarial_train<E: Executor>(
    mut model: ReferenceModel,
    data: &Dataset,
    schema: &DatasetSchema,
    constraints: &ConstraintSet,
    at_cfg: &ATConfig,
    train_cfg: &TrainConfig,
    exec: &E,
) -> Result<(ReferenceModel, History), TrainError> {
    if !(0.0..=1.0).contains(&at_cfg.replay) {
        return Err(TrainError::Config("replay must be in [0, 1]"));
    }
    at_cfg.inner.validate().map_err(|e| TrainError::Hook(e.to_string()))?;
    data.validate(schema).map_err(|e| TrainError::Data(e.to_string()))?;
    let penalty_cfg = at_cfg.inner.penalty_config();
    if let Some(i) = (0..data.len()).find(|&i| !check_row(constraints, data.x.row(i), &penalty_cfg)) {
        return Err(TrainError::Data(format!("row {i} violates the constraints")));
    }
    if model.scaler.is_none() {
        model.scaler = Some(MinMaxScaler::from_schema(schema));
    }
    let mut hook = AdversarialBatches { data, schema, constraints, cfg: at_cfg, exec };
    fit_with_hook(model, data, train_cfg, &mut hook)
}

/// A warning when adversarial training costs more clean accuracy than `max_drop`.
pub fn clean_drop_warning(standard_accuracy: f64, adversarial_accuracy: f64, max_drop: f64) -> Option<String> {
    let drop = standard_accuracy - adversarial_accuracy;
    (drop > max_drop).then(|| {
        format!(
            "adversarial training lowered clean accuracy by {:.1} points ({:.3} -> {:.3}), above the {:.1}-point budget",
            100.0 * drop,
            standard_accuracy,
            adversarial_accuracy,
            100.0 * max_drop
        )
    })
}
