use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::SweepPoint;
use crate::attack::AttackConfig;
use crate::metrics::Metrics;

pub(super) const DISTANCE_SPACE: &str = "scaled";

/// Valid successes credited to each attack stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub capgd: usize,
    pub moeva: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: String,
    pub defense: String,
    pub seed: u64,
    /// Metrics on the full test split.
    pub clean: Metrics,
    /// Correctly classified critical-class rows before capping.
    pub attack_set_eligible: usize,
    pub attack_set_size: usize,
    pub max_attack_samples: usize,
    pub robust_accuracy_constrained: f64,
    pub robust_accuracy_unconstrained: f64,
    pub valid_successes: usize,
    pub successes_by_stage: StageCounts,
    /// Candidates flagged valid by the attack that failed re-validation.
    pub revalidation_failures: usize,
    /// Space in which perturbation norms are measured.
    pub distance_space: String,
    pub attack: AttackConfig,
    #[serde(default)]
    pub budgets: Vec<SweepPoint>,
    pub wall_time_s: f64,
}

impl EvaluationReport {
    /// Copy with every wall-clock field set to zero.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.wall_time_s = 0.0;
        for p in &mut r.budgets {
            p.wall_time_s = 0.0;
        }
        r
    }
}

/// Reports ordered by constrained robust accuracy, best first; ties keep
/// their input order.
pub fn leaderboard(mut reports: Vec<EvaluationReport>) -> Vec<EvaluationReport> {
    reports.sort_by(|a, b| b.robust_accuracy_constrained.total_cmp(&a.robust_accuracy_constrained));
    reports
}
