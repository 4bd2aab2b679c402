//! Evaluation protocol: attack-set selection, robust accuracy, budget
//! sweeps and reports.
//!
//! Only correctly classified rows of the critical class are attacked. A row
//! counts as broken when its final candidate is misclassified and, under
//! constrained validation, also passes the independent [`Validator`]; any
//! other candidate reverts to the original row.
//!
//! [`Validator`]: crate::attack::Validator

mod report;

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{leaderboard, EvaluationReport, StageCounts};

use crate::attack::{AttackConfig, AttackContext, AttackError, AttackResult, SampleResult, Stage, ViolationCounts};
use crate::dsl::ConstraintSet;
use crate::exec::Executor;
use crate::matrix::Matrix;
use crate::metrics::{classify, metrics, MetricsError};
use crate::model::{Classifier, ModelError, ReferenceModel};
use crate::scaler::MinMaxScaler;
use crate::schema::{DataError, Dataset, DatasetSchema};

/// Default cap on the number of attacked rows.
pub const DEFAULT_MAX_ATTACK_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("no correctly classified rows of the critical class to attack")]
    EmptyAttackSet,
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid sweep: {0}")]
    Sweep(&'static str),
}

/// Source of wall-clock seconds; reports record zero without one.
pub trait Clock {
    fn seconds(&self) -> f64;
}

pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Rows whose label is the critical class and which `model` (on scaled
/// inputs) classifies correctly.
pub fn select_attack_set<C: Classifier>(
    model: &C,
    scaler: &MinMaxScaler,
    data: &Dataset,
    schema: &DatasetSchema,
    threshold: f64,
) -> Result<Vec<usize>, BenchError> {
    let critical = schema.critical_class;
    let idx: Vec<usize> = (0..data.len())
        .filter(|&i| {
            data.y[i] == critical && classify(model.proba(&scaler.transform_row(data.x.row(i)))[1], threshold) == critical
        })
        .collect();
    if idx.is_empty() {
        return Err(BenchError::EmptyAttackSet);
    }
    Ok(idx)
}

/// At most `cap` of `idx`, drawn without replacement under `seed`, in
/// their original order.
pub fn cap_attack_set(idx: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    if idx.len() <= cap {
        return idx.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, idx.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|k| idx[k]).collect()
}

/// Robust accuracies recomputed from attack outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub attacked: usize,
    /// Candidates the model misclassifies.
    pub misclassified: usize,
    /// Misclassified candidates that also pass validation.
    pub valid_successes: usize,
    pub robust_accuracy_constrained: f64,
    pub robust_accuracy_unconstrained: f64,
    /// Samples the attack flagged as valid successes that fail re-validation.
    pub revalidation: ViolationCounts,
}

/// Re-scores `result` against the original rows `x` and labels `y`: the
/// model decision is recomputed from each raw candidate and validity is
/// re-checked.
pub fn score<C: Classifier>(ctx: &AttackContext<'_, C>, x: &Matrix, y: &[u8], result: &AttackResult) -> Scores {
    let mut s = Scores { attacked: result.len(), ..Scores::default() };
    for (i, sample) in result.samples.iter().enumerate() {
        let orig = x.row(i);
        let misclassified = ctx.misclassified(&ctx.scaler.transform_row(&sample.candidate), y[i]);
        let violation = ctx.validator().violation(orig, &sample.candidate);
        if misclassified {
            s.misclassified += 1;
            if violation.is_none() {
                s.valid_successes += 1;
            }
        }
        if sample.valid_success() {
            if let Some(v) = violation {
                s.revalidation.add(&v);
            }
        }
    }
    if s.attacked > 0 {
        let n = s.attacked as f64;
        s.robust_accuracy_constrained = 1.0 - s.valid_successes as f64 / n;
        s.robust_accuracy_unconstrained = 1.0 - s.misclassified as f64 / n;
    }
    s
}

/// Runs CAA on every row of `x` and returns the robust accuracy with or
/// without constrained validation, plus the raw attack outputs.
pub fn robust_accuracy<C: Classifier, E: Executor>(
    ctx: &AttackContext<'_, C>,
    x: &Matrix,
    y: &[u8],
    constrained_validation: bool,
    exec: &E,
) -> Result<(f64, AttackResult), BenchError> {
    if x.rows() == 0 {
        return Err(BenchError::EmptyAttackSet);
    }
    let result = crate::attack::caa(ctx, x, y, exec)?;
    let s = score(ctx, x, y, &result);
    let ra = if constrained_validation { s.robust_accuracy_constrained } else { s.robust_accuracy_unconstrained };
    Ok((ra, result))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Eps,
    GradientIters,
    SearchIters,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Eps => "eps",
            SweepAxis::GradientIters => "gradient_iters",
            SweepAxis::SearchIters => "search_iters",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [SweepAxis::Eps, SweepAxis::GradientIters, SweepAxis::SearchIters].into_iter().find(|a| a.name() == s)
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Eps => alloc::vec![0.25, 0.5, 1.0, 5.0],
            SweepAxis::GradientIters => alloc::vec![5.0, 10.0, 20.0, 100.0],
            SweepAxis::SearchIters => alloc::vec![50.0, 100.0, 200.0, 1000.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis) -> Self {
        Self { values: axis.default_values(), axis }
    }

    /// Checks the values and returns them sorted ascending.
    fn sorted_values(&self) -> Result<Vec<f64>, BenchError> {
        if self.values.is_empty() {
            return Err(BenchError::Sweep("no values"));
        }
        for &v in &self.values {
            match self.axis {
                SweepAxis::Eps if !(v >= 0.0 && v.is_finite()) => return Err(BenchError::Sweep("eps values must be finite and nonnegative")),
                SweepAxis::GradientIters | SweepAxis::SearchIters if !(v >= 1.0 && v.fract() == 0.0 && v <= 1e9) => {
                    return Err(BenchError::Sweep("iteration counts must be positive integers"))
                }
                _ => {}
            }
        }
        let mut values = self.values.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(values)
    }

    /// `base` with this axis set to `value`.
    pub fn apply(&self, base: &AttackConfig, value: f64) -> AttackConfig {
        let mut cfg = base.clone();
        match self.axis {
            SweepAxis::Eps => cfg.budget.eps = value,
            SweepAxis::GradientIters => cfg.budget.n_iter_gradient = value as usize,
            SweepAxis::SearchIters => cfg.budget.n_gen = value as usize,
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub value: f64,
    pub robust_accuracy_constrained: f64,
    pub robust_accuracy_unconstrained: f64,
    pub valid_successes: usize,
    pub reused: usize,
    pub wall_time_s: f64,
}

/// Evaluates CAA once per sweep value, in ascending order, on the attack
/// rows `x`.
///
/// Along the eps axis a row keeps any valid success found at a smaller
/// eps (still inside the larger ball), so robust accuracy cannot increase.
#[allow(clippy::too_many_arguments)]
pub fn budget_sweep<C: Classifier, E: Executor>(
    model: &C,
    scaler: &MinMaxScaler,
    schema: &DatasetSchema,
    constraints: &ConstraintSet,
    base: &AttackConfig,
    x: &Matrix,
    y: &[u8],
    spec: &SweepSpec,
    exec: &E,
    clock: &dyn Clock,
) -> Result<Vec<SweepPoint>, BenchError> {
    if x.rows() == 0 {
        return Err(BenchError::EmptyAttackSet);
    }
    let values = spec.sorted_values()?;
    let mut out = Vec::with_capacity(values.len());
    let mut previous: Option<AttackResult> = None;
    for value in values {
        let start = clock.seconds();
        let ctx = AttackContext::new(model, scaler, schema, constraints, spec.apply(base, value))?;
        let reusable = |i: usize| -> Option<SampleResult> {
            let prev = &previous.as_ref()?.samples[i];
            (spec.axis == SweepAxis::Eps && prev.valid_success() && ctx.validator().is_valid(x.row(i), &prev.candidate))
                .then(|| prev.clone())
        };
        let samples = exec.map(x.rows(), |i| reusable(i).unwrap_or_else(|| ctx.attack_sample(x.row(i), y[i], i)));
        let reused = (0..x.rows()).filter(|&i| reusable(i).is_some()).count();
        let result = AttackResult { samples };
        let s = score(&ctx, x, y, &result);
        out.push(SweepPoint {
            axis: spec.axis,
            value,
            robust_accuracy_constrained: s.robust_accuracy_constrained,
            robust_accuracy_unconstrained: s.robust_accuracy_unconstrained,
            valid_successes: s.valid_successes,
            reused,
            wall_time_s: clock.seconds() - start,
        });
        previous = Some(result);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub attack: AttackConfig,
    pub max_attack_samples: usize,
    pub model_name: String,
    pub defense: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            attack: AttackConfig::default(),
            max_attack_samples: DEFAULT_MAX_ATTACK_SAMPLES,
            model_name: "mlp".into(),
            defense: "none".into(),
        }
    }
}

/// Outputs of [`evaluate`] beyond the report itself.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: EvaluationReport,
    /// Dataset rows that were attacked, in order.
    pub attack_rows: Vec<usize>,
    pub result: AttackResult,
}

struct Prepared<'a> {
    scaler: &'a MinMaxScaler,
    clean: crate::metrics::Metrics,
    eligible: usize,
    attack_rows: Vec<usize>,
    subset: Dataset,
}

fn prepare<'a>(model: &'a ReferenceModel, test: &Dataset, schema: &DatasetSchema, cfg: &EvalConfig) -> Result<Prepared<'a>, BenchError> {
    test.validate(schema)?;
    let scaler = model.scaler()?;
    let proba = model.predict_proba(&test.x)?;
    let scores: Vec<f64> = (0..test.len()).map(|i| proba.get(i, 1)).collect();
    let clean = metrics(&test.y, &scores, cfg.attack.threshold)?;
    let eligible = select_attack_set(model, scaler, test, schema, cfg.attack.threshold)?;
    let attack_rows = cap_attack_set(&eligible, cfg.max_attack_samples, cfg.attack.budget.seed);
    let subset = test.subset(&attack_rows);
    Ok(Prepared { scaler, clean, eligible: eligible.len(), attack_rows, subset })
}

impl Prepared<'_> {
    fn report(&self, cfg: &EvalConfig) -> EvaluationReport {
        EvaluationReport {
            model: cfg.model_name.clone(),
            defense: cfg.defense.clone(),
            seed: cfg.attack.budget.seed,
            clean: self.clean,
            attack_set_eligible: self.eligible,
            attack_set_size: self.attack_rows.len(),
            max_attack_samples: cfg.max_attack_samples,
            robust_accuracy_constrained: 1.0,
            robust_accuracy_unconstrained: 1.0,
            valid_successes: 0,
            successes_by_stage: StageCounts::default(),
            revalidation_failures: 0,
            distance_space: report::DISTANCE_SPACE.into(),
            attack: cfg.attack.clone(),
            budgets: Vec::new(),
            wall_time_s: 0.0,
        }
    }
}

/// Clean metrics on all of `test`, then CAA on the capped attack set.
pub fn evaluate<E: Executor>(
    model: &ReferenceModel,
    test: &Dataset,
    schema: &DatasetSchema,
    constraints: &ConstraintSet,
    cfg: &EvalConfig,
    exec: &E,
    clock: &dyn Clock,
) -> Result<Evaluation, BenchError> {
    let prep = prepare(model, test, schema, cfg)?;
    let ctx = AttackContext::new(model, prep.scaler, schema, constraints, cfg.attack.clone())?;
    let start = clock.seconds();
    let result = crate::attack::caa(&ctx, &prep.subset.x, &prep.subset.y, exec)?;
    let wall_time_s = clock.seconds() - start;
    let s = score(&ctx, &prep.subset.x, &prep.subset.y, &result);

    let mut stages = StageCounts::default();
    for sample in result.samples.iter().filter(|r| r.valid_success()) {
        match sample.stage {
            Stage::Capgd => stages.capgd += 1,
            Stage::Moeva => stages.moeva += 1,
            Stage::Original => {}
        }
    }
    let report = EvaluationReport {
        robust_accuracy_constrained: s.robust_accuracy_constrained,
        robust_accuracy_unconstrained: s.robust_accuracy_unconstrained,
        valid_successes: s.valid_successes,
        successes_by_stage: stages,
        revalidation_failures: s.revalidation.total(),
        wall_time_s,
        ..prep.report(cfg)
    };
    Ok(Evaluation { report, attack_rows: prep.attack_rows, result })
}

/// Clean metrics plus a [`budget_sweep`] on the capped attack set. The
/// top-level robust accuracies and success count are those of the
/// largest budget.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_sweep<E: Executor>(
    model: &ReferenceModel,
    test: &Dataset,
    schema: &DatasetSchema,
    constraints: &ConstraintSet,
    cfg: &EvalConfig,
    spec: &SweepSpec,
    exec: &E,
    clock: &dyn Clock,
) -> Result<EvaluationReport, BenchError> {
    let prep = prepare(model, test, schema, cfg)?;
    let start = clock.seconds();
    let budgets =
        budget_sweep(model, prep.scaler, schema, constraints, &cfg.attack, &prep.subset.x, &prep.subset.y, spec, exec, clock)?;
    let wall_time_s = clock.seconds() - start;
    let last = budgets.last().cloned().ok_or(BenchError::Sweep("no values"))?;
    Ok(EvaluationReport {
        robust_accuracy_constrained: last.robust_accuracy_constrained,
        robust_accuracy_unconstrained: last.robust_accuracy_unconstrained,
        valid_successes: last.valid_successes,
        attack: spec.apply(&cfg.attack, last.value),
        budgets,
        wall_time_s,
        ..prep.report(cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::tests::{config, unit_scaler, unit_schema, Linear};
    use crate::attack::Norm;
    use crate::dsl::parse_constraint_file;
    use crate::exec::Sequential;
    use alloc::vec;

    fn line_data(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + 0.5) / n as f64, 0.5]).collect();
        let y = rows.iter().map(|r| u8::from(r[0] > 0.3)).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn attack_set_selection() {
        let (schema, scaler) = (unit_schema(2), unit_scaler(2));
        let data = line_data(100);
        let perfect = Linear { w: vec![100.0, 0.0], b: -30.0 };
        let all: Vec<usize> = (0..100).filter(|&i| data.y[i] == 1).collect();
        assert_eq!(select_attack_set(&perfect, &scaler, &data, &schema, 0.5).unwrap(), all);
        let never = Linear { w: vec![0.0, 0.0], b: -5.0 };
        assert_eq!(select_attack_set(&never, &scaler, &data, &schema, 0.5), Err(BenchError::EmptyAttackSet));
        // Threshold at 0.4 misses critical rows in (0.3, 0.4).
        let shifted = Linear { w: vec![100.0, 0.0], b: -40.0 };
        let got = select_attack_set(&shifted, &scaler, &data, &schema, 0.5).unwrap();
        let tally = (0..100).filter(|&i| data.y[i] == 1 && data.x.get(i, 0) >= 0.4).count();
        assert_eq!(got.len(), tally);
        assert_eq!(got.len(), 60);
    }

    #[test]
    fn capping_is_seeded_and_ordered() {
        let idx: Vec<usize> = (0..1000).map(|i| i * 2).collect();
        let a = cap_attack_set(&idx, 500, 3);
        assert_eq!(a.len(), 500);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, cap_attack_set(&idx, 500, 3));
        assert_ne!(a, cap_attack_set(&idx, 500, 4));
        assert_eq!(cap_attack_set(&idx[..10], 500, 3), &idx[..10]);
    }

    fn hand_result(flags: &[(bool, bool)], x: &Matrix) -> AttackResult {
        let samples = flags
            .iter()
            .enumerate()
            .map(|(i, &(success, valid))| SampleResult {
                candidate: x.row(i).to_vec(),
                success,
                valid,
                stage: Stage::Capgd,
                capgd_trace: vec![],
                moeva_trace: vec![],
            })
            .collect();
        AttackResult { samples }
    }

    #[test]
    fn scoring_arithmetic() {
        // The model reports class 0 for z0 < 0.5; candidates below are
        // "successes", and those with F1 > F0 violate the constraint.
        let (schema, scaler) = (unit_schema(2), unit_scaler(2));
        let cs = parse_constraint_file("F1 <= F0", &schema).unwrap();
        let model = Linear { w: vec![100.0, 0.0], b: -50.0 };
        let ctx = AttackContext::new(&model, &scaler, &schema, &cs, config(Norm::L2, 10.0)).unwrap();
        let mut rows = vec![];
        for i in 0..10 {
            rows.push(if i < 4 { vec![0.4, 0.1] } else if i < 7 { vec![0.4, 0.45] } else { vec![0.9, 0.1] });
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let y = vec![1; 10];
        let result = hand_result(&[(true, true); 10], &x);
        let s = score(&ctx, &x, &y, &result);
        assert_eq!(s.valid_successes, 4);
        assert!((s.robust_accuracy_constrained - 0.6).abs() < 1e-15);
        assert!((s.robust_accuracy_unconstrained - 0.3).abs() < 1e-15);
        assert!(s.robust_accuracy_unconstrained <= s.robust_accuracy_constrained);
        // Rows 4..7 are flagged valid by the attack but fail re-validation.
        assert_eq!(s.revalidation.constraint, 3);
    }

    #[test]
    fn all_invalid_candidates_mean_full_robustness() {
        let (schema, scaler) = (unit_schema(2), unit_scaler(2));
        let cs = parse_constraint_file("F1 <= F0", &schema).unwrap();
        let model = Linear { w: vec![100.0, 0.0], b: -50.0 };
        let ctx = AttackContext::new(&model, &scaler, &schema, &cs, config(Norm::L2, 10.0)).unwrap();
        let x = Matrix::from_rows(&vec![vec![0.4, 0.45]; 5]).unwrap();
        let s = score(&ctx, &x, &[1; 5], &hand_result(&[(true, false); 5], &x));
        assert_eq!(s.robust_accuracy_constrained, 1.0);
        assert_eq!(s.robust_accuracy_unconstrained, 0.0);
    }

    fn sweep_fixture() -> (DatasetSchema, MinMaxScaler, ConstraintSet, Linear, Matrix, Vec<u8>) {
        let schema = unit_schema(3);
        let scaler = unit_scaler(3);
        let cs = parse_constraint_file("F0 == F1 + F2\nif F1 > 0.6 then F2 <= 0.1", &schema).unwrap();
        let model = Linear { w: vec![1.0, 5.0, 3.0], b: -3.2 };
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let a = 0.35 + 0.015 * i as f64;
                let b = 0.05 + 0.01 * (i % 7) as f64;
                vec![a + b, a, b]
            })
            .filter(|r| model.proba(r)[1] >= 0.5)
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y = vec![1; x.rows()];
        (schema, scaler, cs, model, x, y)
    }

    #[test]
    fn eps_sweep_is_monotone_and_single_value_matches_direct_call() {
        let (schema, scaler, cs, model, x, y) = sweep_fixture();
        let mut base = config(Norm::L2, 0.5);
        base.budget.n_gen = 10;
        base.budget.n_pop = 20;
        base.budget.n_off = 20;
        let spec = SweepSpec { axis: SweepAxis::Eps, values: vec![0.3, 0.05, 0.15] };
        let points = budget_sweep(&model, &scaler, &schema, &cs, &base, &x, &y, &spec, &Sequential, &NoClock).unwrap();
        assert_eq!(points.iter().map(|p| p.value).collect::<Vec<_>>(), [0.05, 0.15, 0.3]);
        assert!(points.windows(2).all(|w| w[1].robust_accuracy_constrained <= w[0].robust_accuracy_constrained));
        assert!(points[2].robust_accuracy_constrained < 1.0);

        let single = SweepSpec { axis: SweepAxis::Eps, values: vec![0.15] };
        let p = budget_sweep(&model, &scaler, &schema, &cs, &base, &x, &y, &single, &Sequential, &NoClock).unwrap();
        let ctx = AttackContext::new(&model, &scaler, &schema, &cs, single.apply(&base, 0.15)).unwrap();
        let (direct, _) = robust_accuracy(&ctx, &x, &y, true, &Sequential).unwrap();
        assert_eq!(p[0].robust_accuracy_constrained, direct);
    }

    #[test]
    fn search_sweep_is_monotone_and_reproducible() {
        let (schema, scaler, cs, model, x, y) = sweep_fixture();
        let mut base = config(Norm::Linf, 0.08);
        base.budget.n_iter_gradient = 2;
        base.budget.n_pop = 20;
        base.budget.n_off = 10;
        let spec = SweepSpec { axis: SweepAxis::SearchIters, values: vec![1.0, 5.0, 20.0] };
        let a = budget_sweep(&model, &scaler, &schema, &cs, &base, &x, &y, &spec, &Sequential, &NoClock).unwrap();
        assert!(a.windows(2).all(|w| w[1].robust_accuracy_constrained <= w[0].robust_accuracy_constrained));
        let b = budget_sweep(&model, &scaler, &schema, &cs, &base, &x, &y, &spec, &Sequential, &NoClock).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_sweeps() {
        let (schema, scaler, cs, model, x, y) = sweep_fixture();
        let base = AttackConfig::default();
        for spec in [
            SweepSpec { axis: SweepAxis::Eps, values: vec![] },
            SweepSpec { axis: SweepAxis::Eps, values: vec![-1.0] },
            SweepSpec { axis: SweepAxis::GradientIters, values: vec![2.5] },
        ] {
            assert!(matches!(
                budget_sweep(&model, &scaler, &schema, &cs, &base, &x, &y, &spec, &Sequential, &NoClock),
                Err(BenchError::Sweep(_))
            ));
        }
        assert_eq!(SweepSpec::new(SweepAxis::SearchIters).values, [50.0, 100.0, 200.0, 1000.0]);
        assert_eq!(SweepAxis::from_name("gradient_iters"), Some(SweepAxis::GradientIters));
    }
}
