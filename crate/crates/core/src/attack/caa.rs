use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{capgd, moeva, AttackContext, AttackError};
use crate::exec::{task_seed, Executor};
use crate::matrix::Matrix;
use crate::model::Classifier;

/// Which search produced a sample's final candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Original,
    Capgd,
    Moeva,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    /// Raw feature row.
    pub candidate: Vec<f64>,
    /// The model misclassifies `candidate`.
    pub success: bool,
    /// `candidate` passes the validator: constraints, distance, mutability, types.
    pub valid: bool,
    pub stage: Stage,
    pub capgd_trace: Vec<f64>,
    pub moeva_trace: Vec<f64>,
}

impl SampleResult {
    pub fn valid_success(&self) -> bool {
        self.success && self.valid
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub samples: Vec<SampleResult>,
}

impl AttackResult {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn valid_successes(&self) -> usize {
        self.samples.iter().filter(|s| s.valid_success()).count()
    }

    pub fn successes(&self) -> usize {
        self.samples.iter().filter(|s| s.success).count()
    }
}

impl<C: Classifier> AttackContext<'_, C> {
    /// CAPGD, then MOEVA (when `n_gen > 0`) if CAPGD found no valid
    /// misclassified candidate. `index` selects the sample's RNG stream.
    ///
    /// Without a valid success the candidate is a misclassified but invalid
    /// one when either stage found it, else the original row.
    pub fn attack_sample(&self, x: &[f64], y: u8, index: usize) -> SampleResult {
        let grad = capgd(self, x, y);
        let grad_valid = self.validator().is_valid(x, &grad.point.raw);
        let mut result = SampleResult {
            success: grad.success,
            valid: grad_valid,
            stage: Stage::Capgd,
            candidate: grad.point.raw,
            capgd_trace: grad.trace,
            moeva_trace: Vec::new(),
        };
        if result.valid_success() {
            return result;
        }
        if self.config.budget.n_gen > 0 {
            let search = moeva(self, x, y, task_seed(self.config.budget.seed, index as u64));
            result.moeva_trace = search.trace;
            if search.feasible || (search.success && !result.success) {
                result.candidate = search.point.raw;
                result.success = search.success;
                result.valid = search.feasible;
                result.stage = Stage::Moeva;
            }
        }
        if !result.success {
            result.candidate = x.to_vec();
            result.valid = true;
            result.stage = Stage::Original;
        }
        result
    }
}

/// Runs the CAPGD + MOEVA ensemble on every row of `x` (raw rows, true
/// labels `y`).
pub fn caa<C: Classifier, E: Executor>(
    ctx: &AttackContext<'_, C>,
    x: &Matrix,
    y: &[u8],
    exec: &E,
) -> Result<AttackResult, AttackError> {
    if x.cols() != ctx.n_features() {
        return Err(AttackError::Width { expected: ctx.n_features(), got: x.cols() });
    }
    if x.rows() != y.len() {
        return Err(AttackError::LabelCount { rows: x.rows(), labels: y.len() });
    }
    let samples = exec.map(x.rows(), |i| ctx.attack_sample(x.row(i), y[i], i));
    Ok(AttackResult { samples })
}
