//! End-to-end runs: generate or load data, train a standard or
//! adversarially trained model, evaluate it under attack.

use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tabrobust_core::bench::{evaluate, Clock, EvalConfig, Evaluation};
use tabrobust_core::defense::{adversarial_train, augment, ATConfig, AugmentConfig, AugmentStats};
use tabrobust_core::exec::Executor;
use tabrobust_core::model::{stratified_split, train, History, ReferenceModel, TrainConfig};
use tabrobust_core::scaler::MinMaxScaler;
use tabrobust_core::synth::{generate_synthetic, Synthetic, SyntheticSpec};
use tabrobust_core::{ConstraintSet, Dataset, DatasetSchema};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub synth: SyntheticSpec,
    /// Stratified share of generated rows written to the test split.
    pub test_fraction: f64,
    /// Hidden layer widths of the classifier.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub adversarial: ATConfig,
    pub eval: EvalConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            synth: SyntheticSpec::default(),
            test_fraction: 0.2,
            hidden: vec![64, 32, 16],
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
            adversarial: ATConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub data: u64,
    pub train: u64,
    pub attack: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self { data: seed, train: seed, attack: seed }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Synth(#[from] tabrobust_core::synth::SynthError),
    #[error(transparent)]
    Train(#[from] tabrobust_core::model::TrainError),
    #[error(transparent)]
    Data(#[from] tabrobust_core::schema::DataError),
    #[error(transparent)]
    Bench(#[from] tabrobust_core::bench::BenchError),
    #[error("test_fraction must be in (0, 1)")]
    TestFraction,
}

/// Wall-clock seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Stratified split of `data` into `(train, test)`.
pub fn split_train_test(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), PipelineError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PipelineError::TestFraction);
    }
    let (train_idx, test_idx) = stratified_split(&data.y, test_fraction, &mut ChaCha8Rng::seed_from_u64(seed));
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}

pub struct SyntheticSplit {
    pub schema: DatasetSchema,
    pub constraints: ConstraintSet,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn synthetic_split(cfg: &Config, seed: u64) -> Result<SyntheticSplit, PipelineError> {
    let Synthetic { schema, data, constraints } = generate_synthetic(&cfg.synth, seed)?;
    let (train, test) = split_train_test(&data, cfg.test_fraction, seed)?;
    Ok(SyntheticSplit { schema, constraints, train, test })
}

/// Untrained classifier whose scaler maps the schema bounds onto `[0, 1]`.
pub fn fresh_model(schema: &DatasetSchema, hidden: &[usize], seed: u64) -> ReferenceModel {
    let mut m = ReferenceModel::new(schema.n_features(), hidden, seed);
    m.scaler = Some(MinMaxScaler::from_schema(schema));
    m
}

pub struct Trained {
    pub model: ReferenceModel,
    pub history: History,
    pub augment: AugmentStats,
}

fn augmented(cfg: &Config, data: &Dataset, schema: &DatasetSchema, cs: &ConstraintSet) -> Result<(Dataset, AugmentStats), PipelineError> {
    Ok(augment(data, schema, cs, cfg.eval.attack.penalty_config(), &cfg.augment)?)
}

/// Standard training, after optional Cutmix augmentation.
pub fn train_standard(
    cfg: &Config,
    data: &Dataset,
    schema: &DatasetSchema,
    cs: &ConstraintSet,
    seed: u64,
) -> Result<Trained, PipelineError> {
    let (data, stats) = augmented(cfg, data, schema, cs)?;
    let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
    let (model, history) = train(fresh_model(schema, &cfg.hidden, seed), &data, &train_cfg)?;
    Ok(Trained { model, history, augment: stats })
}

/// Constrained adversarial training, after optional Cutmix augmentation.
pub fn train_adversarial<E: Executor>(
    cfg: &Config,
    data: &Dataset,
    schema: &DatasetSchema,
    cs: &ConstraintSet,
    seed: u64,
    exec: &E,
) -> Result<Trained, PipelineError> {
    let (data, stats) = augmented(cfg, data, schema, cs)?;
    let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
    let mut at = cfg.adversarial.clone();
    at.inner.budget.seed = seed;
    let (model, history) = adversarial_train(fresh_model(schema, &cfg.hidden, seed), &data, schema, cs, &at, &train_cfg, exec)?;
    Ok(Trained { model, history, augment: stats })
}

pub fn evaluate_model<E: Executor>(
    cfg: &Config,
    model: &ReferenceModel,
    split: &SyntheticSplit,
    name: &str,
    defense: &str,
    attack_seed: u64,
    exec: &E,
    clock: &dyn Clock,
) -> Result<Evaluation, PipelineError> {
    let mut eval = cfg.eval.clone();
    eval.attack.budget.seed = attack_seed;
    eval.model_name = name.to_string();
    eval.defense = defense.to_string();
    Ok(evaluate(model, &split.test, &split.schema, &split.constraints, &eval, exec, clock)?)
}

pub struct BenchmarkRun {
    pub split: SyntheticSplit,
    pub standard: Trained,
    pub standard_eval: Evaluation,
    pub adversarial: Option<(Trained, Evaluation)>,
}

/// Synthetic data, a standard model and optionally an adversarially trained
/// one, each evaluated with the configured attack.
pub fn run_benchmark<E: Executor>(
    cfg: &Config,
    seeds: Seeds,
    with_adversarial: bool,
    exec: &E,
    clock: &dyn Clock,
) -> Result<BenchmarkRun, PipelineError> {
    let split = synthetic_split(cfg, seeds.data)?;
    let standard = train_standard(cfg, &split.train, &split.schema, &split.constraints, seeds.train)?;
    let name = model_name(&cfg.hidden);
    let defense = defense_name(cfg, false);
    let standard_eval = evaluate_model(cfg, &standard.model, &split, &name, &defense, seeds.attack, exec, clock)?;
    let adversarial = if with_adversarial {
        let at = train_adversarial(cfg, &split.train, &split.schema, &split.constraints, seeds.train, exec)?;
        let ev = evaluate_model(cfg, &at.model, &split, &name, &defense_name(cfg, true), seeds.attack, exec, clock)?;
        Some((at, ev))
    } else {
        None
    };
    Ok(BenchmarkRun { split, standard, standard_eval, adversarial })
}

pub fn model_name(hidden: &[usize]) -> String {
    let widths: Vec<String> = hidden.iter().map(usize::to_string).collect();
    format!("mlp-{}", widths.join("-"))
}

pub fn defense_name(cfg: &Config, adversarial: bool) -> String {
    let aug = cfg.augment.method != tabrobust_core::defense::AugmentMethod::None && cfg.augment.ratio > 0.0;
    match (aug, adversarial) {
        (false, false) => "none",
        (false, true) => "adversarial",
        (true, false) => "cutmix",
        (true, true) => "cutmix+adversarial",
    }
    .to_string()
}
