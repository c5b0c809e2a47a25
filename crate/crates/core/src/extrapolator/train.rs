use std::io::Write;
use std::path::Path;

use ndarray::{s, Array3, ArrayView3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExtrapolatorModel, Scalar, Tape};
use crate::cube_pipeline::TrainingPair;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub master_seed: u64,
    /// Sequences per gradient work unit. Fixed so the summation order, and
    /// therefore the result, does not depend on the thread count.
    pub chunk_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            batch_size: 256,
            max_epochs: 100,
            patience: 10,
            master_seed: 0,
            chunk_size: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero rate is accepted: it freezes the weights, which is handy for
        // checking the bookkeeping around the optimiser.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Config(format!("{name} = {b} outside (0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.batch_size == 0 || self.chunk_size == 0 {
            return Err(Error::Config("batch and chunk sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Training pairs packed as `[n, L, 2]` inputs and `[n, K/2, 2]` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet<T> {
    pub inputs: Array3<T>,
    pub labels: Array3<T>,
}

impl<T: Scalar> PairSet<T> {
    pub fn from_pairs(pairs: &[TrainingPair]) -> Result<Self> {
        let (l, k) = pairs.first().map_or((0, 0), |p| (p.input.len(), p.label.len()));
        let mut inputs = Array3::<T>::zeros((pairs.len(), l, 2));
        let mut labels = Array3::<T>::zeros((pairs.len(), k, 2));
        let cast = |v: f64| T::from(v).expect("float conversion");
        for (n, p) in pairs.iter().enumerate() {
            if p.input.len() != l || p.label.len() != k {
                return Err(Error::Config(format!(
                    "pair {n} has shape ({}, {}), expected ({l}, {k})",
                    p.input.len(),
                    p.label.len()
                )));
            }
            for (t, z) in p.input.iter().enumerate() {
                inputs[[n, t, 0]] = cast(z.re);
                inputs[[n, t, 1]] = cast(z.im);
            }
            for (t, z) in p.label.iter().enumerate() {
                labels[[n, t, 0]] = cast(z.re);
                labels[[n, t, 1]] = cast(z.im);
            }
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.dim().0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_len(&self) -> usize {
        self.inputs.dim().1
    }

    pub fn steps(&self) -> usize {
        self.labels.dim().1
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select(Axis(0), idx),
            labels: self.labels.select(Axis(0), idx),
        }
    }
}

/// Squared error sum of one chunk and its gradient, with the loss scaled by
/// `1 / denom`.
fn chunk_gradient<T: Scalar>(
    model: &ExtrapolatorModel<T>,
    inputs: ArrayView3<T>,
    labels: ArrayView3<T>,
    denom: f64,
) -> (f64, ExtrapolatorModel<T>) {
    let mut tape = Tape::new();
    let pred = model.rollout(inputs, labels.dim().1, Some(&mut tape));
    let diff = pred - labels;
    let sse: f64 = diff.iter().map(|d| d.to_f64().unwrap_or(f64::NAN).powi(2)).sum();
    let scale = T::from(2.0 / denom).expect("float conversion");
    let d_pred = diff.mapv(|d| d * scale);
    let mut grad = ExtrapolatorModel::zeros(model.hidden_size());
    model.backward(&tape, &d_pred, &mut grad);
    (sse, grad)
}

/// Mean squared error over a batch and its gradient.
///
/// The batch is cut into fixed chunks that run in parallel; partial
/// gradients are then summed in chunk order.
pub fn batch_gradient<T: Scalar>(
    model: &ExtrapolatorModel<T>,
    inputs: ArrayView3<T>,
    labels: ArrayView3<T>,
    chunk_size: usize,
) -> (f64, ExtrapolatorModel<T>) {
    let n = inputs.dim().0;
    let denom = (n * labels.dim().1 * 2) as f64;
    let starts: Vec<usize> = (0..n).step_by(chunk_size.max(1)).collect();
    let parts: Vec<(f64, ExtrapolatorModel<T>)> = starts
        .par_iter()
        .map(|&a| {
            let b = (a + chunk_size).min(n);
            chunk_gradient(model, inputs.slice(s![a..b, .., ..]), labels.slice(s![a..b, .., ..]), denom)
        })
        .collect();
    let mut total = ExtrapolatorModel::zeros(model.hidden_size());
    let mut sse = 0.0;
    for (part_sse, g) in &parts {
        sse += part_sse;
        total.add_assign(g);
    }
    (sse / denom, total)
}

/// Mean squared error of the rollout over a whole pair set.
pub fn evaluate_loss<T: Scalar>(model: &ExtrapolatorModel<T>, set: &PairSet<T>, chunk_size: usize) -> f64 {
    let n = set.len();
    if n == 0 {
        return f64::NAN;
    }
    let chunk = chunk_size.max(1) * 4;
    let starts: Vec<usize> = (0..n).step_by(chunk).collect();
    let parts: Vec<f64> = starts
        .par_iter()
        .map(|&a| {
            let b = (a + chunk).min(n);
            let labels = set.labels.slice(s![a..b, .., ..]);
            let pred = model.rollout(set.inputs.slice(s![a..b, .., ..]), set.steps(), None);
            (pred - labels)
                .iter()
                .map(|d| d.to_f64().unwrap_or(f64::NAN).powi(2))
                .sum()
        })
        .collect();
    parts.iter().sum::<f64>() / (n * set.steps() * 2) as f64
}

/// Adam with the bias correction folded into the step size and epsilon
/// added to the uncorrected root second moment.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: ExtrapolatorModel<T>,
    v: ExtrapolatorModel<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(hidden: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            m: ExtrapolatorModel::zeros(hidden),
            v: ExtrapolatorModel::zeros(hidden),
        }
    }

    pub fn step(&mut self, model: &mut ExtrapolatorModel<T>, grad: &ExtrapolatorModel<T>) {
        self.step = self.step.saturating_add(1);
        let t = self.step;
        let lr_t = self.lr * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        let cast = |v: f64| T::from(v).expect("float conversion");
        let (b1, b2, lr_t, eps) = (cast(self.beta1), cast(self.beta2), cast(lr_t), cast(self.epsilon));
        let one = T::one();
        let tensors = model
            .params_mut()
            .into_iter()
            .zip(grad.params())
            .zip(self.m.params_mut().into_iter().zip(self.v.params_mut()));
        for ((p, g), (m, v)) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                p[i] = p[i] - lr_t * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept; `None` if no epoch beat the
    /// initial model.
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

pub const TRAINING_LOG_VERSION: u32 = 1;

impl TrainingLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("version,epoch,train_loss,val_loss\n");
        for e in &self.epochs {
            text.push_str(&format!(
                "{TRAINING_LOG_VERSION},{},{:.9e},{:.9e}\n",
                e.epoch, e.train_loss, e.val_loss
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

pub fn train<T: Scalar>(
    model: ExtrapolatorModel<T>,
    train_set: &PairSet<T>,
    val_set: &PairSet<T>,
    cfg: &TrainConfig,
) -> Result<(ExtrapolatorModel<T>, TrainingLog)> {
    train_with(model, train_set, val_set, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
///
/// Mini-batches are drawn from a per-epoch shuffle seeded by
/// `cfg.master_seed`. Training stops after `cfg.patience` epochs without a
/// validation improvement, and the best weights seen (possibly the initial
/// ones) are returned.
pub fn train_with<T: Scalar>(
    mut model: ExtrapolatorModel<T>,
    train_set: &PairSet<T>,
    val_set: &PairSet<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ExtrapolatorModel<T>, TrainingLog)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    if val_set.is_empty() {
        return Err(Error::Config("empty validation set".into()));
    }
    if train_set.input_len() == 0 || train_set.steps() == 0 {
        return Err(Error::Config("training pairs need non-empty inputs and labels".into()));
    }
    if (train_set.input_len(), train_set.steps()) != (val_set.input_len(), val_set.steps()) {
        return Err(Error::Config("training and validation pairs differ in shape".into()));
    }

    let initial = evaluate_loss(&model, val_set, cfg.chunk_size);
    if !initial.is_finite() {
        return Err(Error::Numeric(format!("initial validation loss is {initial}")));
    }
    let mut log = TrainingLog {
        initial_val_loss: initial,
        epochs: Vec::new(),
        best_epoch: None,
        best_val_loss: initial,
        stopped_early: false,
    };
    let mut best = model.clone();
    let mut adam = Adam::new(model.hidden_size(), cfg);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);

        let mut weighted = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = train_set.select(idx);
            let (loss, grad) = batch_gradient(&model, batch.inputs.view(), batch.labels.view(), cfg.chunk_size);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("training loss {loss} at epoch {epoch}, batch {b}")));
            }
            weighted += loss * idx.len() as f64;
            adam.step(&mut model, &grad);
        }
        if !model.is_finite() {
            return Err(Error::Numeric(format!("non-finite weights after epoch {epoch}")));
        }
        let val_loss = evaluate_loss(&model, val_set, cfg.chunk_size);
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("validation loss {val_loss} at epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: weighted / train_set.len() as f64,
            val_loss,
        };
        on_epoch(&record);
        log.epochs.push(record);

        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = Some(epoch);
            best.clone_from(&model);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, log))
}
