//! Reference fully connected classifier.
//!
//! Rectifier hidden layers, two logits, softmax output. The model owns the
//! min-max scaler fitted on its training split: `*_scaled` methods take
//! inputs already in scaled space, the others take raw feature rows.

mod train;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use train::{fit_with_hook, stratified_split, train, BatchHook, EpochStats, History, NoHook, Optimizer, TrainConfig, TrainError};

use crate::math;
use crate::matrix::Matrix;
use crate::scaler::MinMaxScaler;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Hidden widths of the default architecture.
pub const DEFAULT_HIDDEN: [usize; 3] = [64, 32, 16];

/// A binary classifier over scaled feature vectors.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;

    /// Class probabilities `[p(0), p(1)]`.
    fn proba(&self, x: &[f64]) -> [f64; 2];

    /// Cross-entropy of label `y`; writes its gradient w.r.t. `x` into `grad`.
    fn loss_gradient(&self, x: &[f64], y: u8, grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model expects {expected} features, got {got}")]
    Width { expected: usize, got: usize },
    #[error("model has no fitted scaler")]
    NotFitted,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint shapes are inconsistent: {0}")]
    Shape(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>, relu: bool) {
        out.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut z = self.bias[o];
            for (a, b) in w.iter().zip(x) {
                z += a * b;
            }
            out.push(if relu && z < 0.0 { 0.0 } else { z });
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceModel {
    pub layers: Vec<Dense>,
    pub scaler: Option<MinMaxScaler>,
}

/// Serialized form of a [`ReferenceModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub widths: Vec<usize>,
    pub layers: Vec<LayerParams>,
    pub scaler: Option<MinMaxScaler>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[inline]
fn softmax2(z: &[f64]) -> [f64; 2] {
    let m = if z[0] > z[1] { z[0] } else { z[1] };
    let e0 = math::exp(z[0] - m);
    let e1 = math::exp(z[1] - m);
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// `-log softmax(z)[y]`, computed stably.
#[inline]
fn cross_entropy(z: &[f64], y: u8) -> f64 {
    let m = if z[0] > z[1] { z[0] } else { z[1] };
    let lse = m + math::ln(math::exp(z[0] - m) + math::exp(z[1] - m));
    lse - z[y as usize]
}

impl ReferenceModel {
    /// He-uniform initialisation; `hidden` are the hidden layer widths.
    pub fn new(n_features: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![n_features];
        widths.extend_from_slice(hidden);
        widths.push(2);
        let layers = widths
            .windows(2)
            .map(|w| {
                let mut d = Dense::zeros(w[0], w[1]);
                let bound = math::sqrt(6.0 / w[0].max(1) as f64);
                d.weights.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
                d
            })
            .collect();
        Self { layers, scaler: None }
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        w.push(self.layers.last().map_or(0, |l| l.outputs));
        w
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn scaler(&self) -> Result<&MinMaxScaler, ModelError> {
        self.scaler.as_ref().ok_or(ModelError::NotFitted)
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(&acts[k], &mut out, k + 1 < self.layers.len());
            acts.push(out);
        }
        acts
    }

    pub fn logits_scaled(&self, x: &[f64]) -> [f64; 2] {
        let mut a = x.to_vec();
        let mut b = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut b, k + 1 < self.layers.len());
            core::mem::swap(&mut a, &mut b);
        }
        [a[0], a[1]]
    }

    pub fn proba_scaled(&self, x: &[f64]) -> [f64; 2] {
        softmax2(&self.logits_scaled(x))
    }

    pub fn predict_proba_scaled(&self, z: &Matrix) -> Result<Matrix, ModelError> {
        if z.cols() != self.n_features() {
            return Err(ModelError::Width { expected: self.n_features(), got: z.cols() });
        }
        let mut out = Matrix::zeros(z.rows(), 2);
        for (i, row) in z.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.proba_scaled(row));
        }
        Ok(out)
    }

    /// Probabilities for raw rows, scaled with the stored scaler.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        let scaler = self.scaler()?;
        if x.cols() != self.n_features() {
            return Err(ModelError::Width { expected: self.n_features(), got: x.cols() });
        }
        let z = scaler.transform(x).map_err(|_| ModelError::Width { expected: self.n_features(), got: x.cols() })?;
        self.predict_proba_scaled(&z)
    }

    /// Cross-entropy and its gradient w.r.t. the scaled input.
    pub fn input_gradient(&self, x: &[f64], y: u8) -> Result<(f64, Vec<f64>), ModelError> {
        if x.len() != self.n_features() {
            return Err(ModelError::Width { expected: self.n_features(), got: x.len() });
        }
        let mut grad = vec![0.0; x.len()];
        let loss = self.backprop(x, y, None, Some(&mut grad));
        Ok((loss, grad))
    }

    /// Zeroed parameter buffer with this model's shapes.
    pub fn zeros_like(&self) -> Vec<Dense> {
        self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect()
    }

    /// Loss for one example; adds parameter gradients into `param_grads` and
    /// writes the input gradient into `input_grad` when given.
    pub fn backprop(&self, x: &[f64], y: u8, mut param_grads: Option<&mut [Dense]>, input_grad: Option<&mut [f64]>) -> f64 {
        let acts = self.forward_all(x);
        let logits = acts.last().unwrap();
        let loss = cross_entropy(logits, y);
        let p = softmax2(logits);
        let mut delta = vec![p[0], p[1]];
        delta[y as usize] -= 1.0;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &acts[k];
            if let Some(g) = param_grads.as_deref_mut() {
                let g = &mut g[k];
                for (o, &d) in delta.iter().enumerate() {
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (w, a) in row.iter_mut().zip(input) {
                        *w += d * a;
                    }
                }
            }
            if k == 0 && input_grad.is_none() {
                break;
            }
            let mut back = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (b, w) in back.iter_mut().zip(row) {
                    *b += d * w;
                }
            }
            if k > 0 {
                // Rectifier derivative, read off the stored activation.
                for (b, a) in back.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        if let Some(g) = input_grad {
            g.copy_from_slice(&delta);
        }
        loss
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            widths: self.widths(),
            layers: self.layers.iter().map(|l| LayerParams { weights: l.weights.clone(), bias: l.bias.clone() }).collect(),
            scaler: self.scaler.clone(),
        }
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self, ModelError> {
        if c.version != CHECKPOINT_VERSION {
            return Err(ModelError::Version(c.version));
        }
        if c.widths.len() < 2 || c.widths.len() != c.layers.len() + 1 {
            return Err(ModelError::Shape("widths must list every layer boundary"));
        }
        if *c.widths.last().unwrap() != 2 {
            return Err(ModelError::Shape("output layer must have 2 units"));
        }
        let mut layers = Vec::with_capacity(c.layers.len());
        for (w, p) in c.widths.windows(2).zip(c.layers) {
            if p.weights.len() != w[0] * w[1] || p.bias.len() != w[1] {
                return Err(ModelError::Shape("layer parameter length mismatch"));
            }
            layers.push(Dense { inputs: w[0], outputs: w[1], weights: p.weights, bias: p.bias });
        }
        if let Some(s) = &c.scaler {
            if s.min.len() != c.widths[0] || s.max.len() != c.widths[0] {
                return Err(ModelError::Shape("scaler width mismatch"));
            }
        }
        Ok(Self { layers, scaler: c.scaler })
    }
}

impl Classifier for ReferenceModel {
    fn n_features(&self) -> usize {
        ReferenceModel::n_features(self)
    }

    fn proba(&self, x: &[f64]) -> [f64; 2] {
        self.proba_scaled(x)
    }

    fn loss_gradient(&self, x: &[f64], y: u8, grad: &mut [f64]) -> f64 {
        self.backprop(x, y, None, Some(grad))
    }
}
