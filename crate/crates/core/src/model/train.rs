use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Dense, ReferenceModel};
use crate::math;
use crate::matrix::Matrix;
use crate::metrics;
use crate::scaler::{MinMaxScaler, ScalerError};
use crate::schema::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd { momentum: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Stratified share of rows held out for best-epoch selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 128, learning_rate: 1e-3, optimizer: Optimizer::default(), seed: 0, validation_fraction: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_auc: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_auc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept, if any epoch ran.
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("dataset width {got} does not match model width {expected}")]
    Width { expected: usize, got: usize },
    #[error(transparent)]
    Scaler(#[from] ScalerError),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error("{0}")]
    Hook(String),
}

/// Per-batch interception point used by adversarial training.
pub trait BatchHook {
    /// May rewrite rows of the scaled `batch` (dataset rows `rows`, labels
    /// `labels`) before the optimizer step.
    fn transform(&mut self, model: &ReferenceModel, rows: &[usize], batch: &mut Matrix, labels: &[u8]) -> Result<(), TrainError>;
}

/// Leaves every batch untouched.
pub struct NoHook;

impl BatchHook for NoHook {
    fn transform(&mut self, _: &ReferenceModel, _: &[usize], _: &mut Matrix, _: &[u8]) -> Result<(), TrainError> {
        Ok(())
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::Config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(TrainError::Config("validation_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Splits row indices per class; returns sorted `(train, validation)`.
pub fn stratified_split(y: &[u8], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..=1u8 {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        let n_val = math::round(fraction * idx.len() as f64) as usize;
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

struct OptimizerState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    decay1: f64,
    decay2: f64,
}

impl OptimizerState {
    fn new(n: usize) -> Self {
        Self { step: 0, m: vec![0.0; n], v: vec![0.0; n], decay1: 1.0, decay2: 1.0 }
    }

    fn update(&mut self, model: &mut ReferenceModel, grads: &[Dense], lr: f64, opt: Optimizer) {
        self.step += 1;
        if let Optimizer::Adam { beta1, beta2, .. } = opt {
            self.decay1 *= beta1;
            self.decay2 *= beta2;
        }
        let mut k = 0;
        for (layer, g) in model.layers.iter_mut().zip(grads) {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(g.bias.iter());
            for (p, &gi) in params.zip(gs) {
                match opt {
                    Optimizer::Adam { beta1, beta2, epsilon } => {
                        self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * gi;
                        self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * gi * gi;
                        let m_hat = self.m[k] / (1.0 - self.decay1);
                        let v_hat = self.v[k] / (1.0 - self.decay2);
                        *p -= lr * m_hat / (math::sqrt(v_hat) + epsilon);
                    }
                    Optimizer::Sgd { momentum } => {
                        self.m[k] = momentum * self.m[k] + gi;
                        *p -= lr * self.m[k];
                    }
                }
                k += 1;
            }
        }
    }
}

fn mean_loss_and_auc(model: &ReferenceModel, z: &Matrix, y: &[u8], idx: &[usize]) -> (f64, Option<f64>) {
    let mut loss = 0.0;
    let mut scores = Vec::with_capacity(idx.len());
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        loss += model.backprop(z.row(i), y[i], None, None);
        scores.push(model.proba_scaled(z.row(i))[1]);
        labels.push(y[i]);
    }
    (loss / idx.len().max(1) as f64, metrics::auc(&labels, &scores).ok())
}

/// Mini-batch training of cross-entropy; keeps the best-validation-AUC weights.
pub fn train(model: ReferenceModel, data: &Dataset, cfg: &TrainConfig) -> Result<(ReferenceModel, History), TrainError> {
    fit_with_hook(model, data, cfg, &mut NoHook)
}

/// [`train`] with a hook that may rewrite each batch before the update.
///
/// A scaler already attached to `model` is kept; otherwise one is fitted on
/// the training split. With a validation split, the
/// weights of the epoch with the highest validation AUC (ties broken by the
/// lower validation loss) are returned; otherwise the final weights.
pub fn fit_with_hook(
    mut model: ReferenceModel,
    data: &Dataset,
    cfg: &TrainConfig,
    hook: &mut dyn BatchHook,
) -> Result<(ReferenceModel, History), TrainError> {
    cfg.validate()?;
    if data.n_features() != model.n_features() {
        return Err(TrainError::Width { expected: model.n_features(), got: data.n_features() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, val_idx) = stratified_split(&data.y, cfg.validation_fraction, &mut rng);
    if train_idx.is_empty() {
        return Err(TrainError::Config("training split is empty"));
    }
    let scaler = match model.scaler.take() {
        Some(s) => s,
        None => MinMaxScaler::fit(&data.x.select_rows(&train_idx))?,
    };
    let z = scaler.transform(&data.x)?;
    model.scaler = Some(scaler);

    let mut history = History::default();
    let mut state = OptimizerState::new(model.n_params());
    let mut best: Option<((f64, f64), ReferenceModel)> = None;
    let mut order = train_idx.clone();
    let width = model.n_features();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for rows in order.chunks(cfg.batch_size) {
            let mut batch = z.select_rows(rows);
            let labels: Vec<u8> = rows.iter().map(|&i| data.y[i]).collect();
            hook.transform(&model, rows, &mut batch, &labels)?;
            if batch.cols() != width || batch.rows() != rows.len() {
                return Err(TrainError::Hook("hook changed the batch shape".into()));
            }
            let mut grads = model.zeros_like();
            let mut batch_loss = 0.0;
            for (r, &label) in batch.iter_rows().zip(&labels) {
                batch_loss += model.backprop(r, label, Some(&mut grads), None);
            }
            if !batch_loss.is_finite() {
                return Err(TrainError::Divergence { epoch });
            }
            let scale = 1.0 / rows.len() as f64;
            for g in &mut grads {
                g.weights.iter_mut().chain(g.bias.iter_mut()).for_each(|v| *v *= scale);
            }
            state.update(&mut model, &grads, cfg.learning_rate, cfg.optimizer);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_idx.len() as f64;
        let (_, train_auc) = mean_loss_and_auc(&model, &z, &data.y, &train_idx);
        let (val_loss, val_auc) = if val_idx.is_empty() {
            (None, None)
        } else {
            let (l, a) = mean_loss_and_auc(&model, &z, &data.y, &val_idx);
            if !l.is_finite() {
                return Err(TrainError::Divergence { epoch });
            }
            (Some(l), a)
        };
        history.epochs.push(EpochStats { epoch, train_loss, train_auc, val_loss, val_auc });
        match val_loss {
            Some(l) => {
                // Highest AUC wins; validation loss breaks ties (AUC saturates early).
                let score = (val_auc.unwrap_or(f64::NEG_INFINITY), -l);
                if best.as_ref().is_none_or(|(s, _)| score.0 > s.0 || (score.0 == s.0 && score.1 > s.1)) {
                    best = Some((score, model.clone()));
                    history.best_epoch = Some(epoch);
                }
            }
            None => history.best_epoch = Some(epoch),
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, history))
}
