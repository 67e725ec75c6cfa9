//! Mini-batch training with Adam and early stopping on validation RMSE.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::network::{backward, check_params, forward, init_weights, loss_mse, mse_grad, param_layout, predict, Mode};
use super::spec::{count_params, Dims, ModelSpec};
use super::tensor::ParamSet;
use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::metrics::rmse;
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Leading layers whose weights are not updated (fine-tuning option).
    pub frozen_layers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_epochs: 50,
            patience: 10,
            batch_size: 256,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            frozen_layers: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `max_epochs == 0` is accepted as a no-op budget.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::precondition("batch size must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::precondition("patience must be positive"));
        }
        if self.max_epochs > 0 && self.patience >= self.max_epochs {
            return Err(Error::precondition("patience must be smaller than max_epochs"));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::precondition("learning rate must be non-negative"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainMeta {
    pub epochs_run: usize,
    /// 1-based epoch whose weights were kept; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_val_rmse: f64,
    pub seed: u64,
    pub train_loss: Vec<f64>,
    pub val_rmse: Vec<f64>,
}

/// A spec with learned weights, ready for inference or serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub dims: Dims,
    pub params: ParamSet<f32>,
    pub meta: TrainMeta,
    /// Names of the per-city scalers the training data was prepared with.
    pub scaler_ids: Vec<String>,
}

impl TrainedModel {
    pub fn new(spec: ModelSpec, dims: Dims, params: ParamSet<f32>) -> Result<Self> {
        spec.validate()?;
        check_params(&spec, dims, &params)?;
        Ok(Self { spec, dims, params, meta: TrainMeta::default(), scaler_ids: Vec::new() })
    }

    pub fn initialized(spec: ModelSpec, dims: Dims, seed: u64) -> Result<Self> {
        let params = init_weights(&spec, dims, seed);
        Self::new(spec, dims, params)
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.spec, self.dims)
    }
}

/// Anything that maps `[batch × lookback × features]` windows to
/// `[batch × features]` next-step predictions.
pub trait Forecaster {
    fn dims(&self) -> Dims;
    fn predict(&self, x: &[f32], batch: usize) -> Result<Vec<f32>>;
}

impl Forecaster for TrainedModel {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn predict(&self, x: &[f32], batch: usize) -> Result<Vec<f32>> {
        predict(&self.spec, self.dims, &self.params, x, batch)
    }
}

/// Trains `spec` from a seeded initialization.
pub fn train(
    spec: &ModelSpec,
    dims: Dims,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    let init = init_weights(spec, dims, derive_seed(config.seed, 0));
    train_from(spec, dims, init, train_set, val_set, config)
}

fn rmse_on<M: Forecaster>(model: &M, set: &WindowedDataset) -> Result<f64> {
    let pred = model.predict(&set.x, set.len())?;
    rmse(&pred, &set.y)
}

/// Trains starting from `initial` weights: seeded shuffling each epoch,
/// validation RMSE after each epoch, stop after `patience` epochs without
/// improvement, and restore the best weights seen.
pub fn train_from(
    spec: &ModelSpec,
    dims: Dims,
    initial: ParamSet<f32>,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::EmptyDataset("training and validation sets must be nonempty".into()));
    }
    if train_set.lookback != dims.lookback || train_set.features != dims.features {
        return Err(Error::shape("dataset window shape does not match model dims"));
    }
    let mut model = TrainedModel::new(spec.clone(), dims, initial)?;
    let frozen = frozen_tensor_count(spec, dims, config.frozen_layers);
    let adam = config.adam();
    let mut state = AdamState::new(&model.params);
    let mut shuffle_rng = seeded(derive_seed(config.seed, 1));
    let mut dropout_rng = seeded(derive_seed(config.seed, 2));

    let w = train_set.window_size();
    let f = train_set.features;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = model.params.clone();
    let mut meta = TrainMeta { seed: config.seed, best_val_rmse: f64::INFINITY, ..TrainMeta::default() };
    let mut stale = 0;
    let mut xb = Vec::with_capacity(config.batch_size * w);
    let mut yb = Vec::with_capacity(config.batch_size * f);

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(train_set.window(i));
                yb.extend_from_slice(train_set.target(i));
            }
            let trace = forward(spec, dims, &model.params, &xb, chunk.len(), Mode::Train(&mut dropout_rng))?;
            loss_sum += f64::from(loss_mse(&trace.output, &yb)?) * chunk.len() as f64;
            let dpred = mse_grad(&trace.output, &yb);
            let grads = backward(spec, dims, &model.params, &trace, &dpred)?;
            adam_step(&mut model.params, &grads, &mut state, &adam, frozen)?;
        }
        let val = rmse_on(&model, val_set)?;
        meta.epochs_run = epoch + 1;
        meta.train_loss.push(loss_sum / train_set.len() as f64);
        meta.val_rmse.push(val);
        if !val.is_finite() {
            return Err(Error::TrainingDiverged { epoch: epoch + 1, value: val });
        }
        if val < meta.best_val_rmse {
            meta.best_val_rmse = val;
            meta.best_epoch = epoch + 1;
            best.clone_from(&model.params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    if config.max_epochs == 0 {
        meta.best_val_rmse = rmse_on(&model, val_set)?;
    }
    model.params = best;
    model.meta = meta;
    Ok(model)
}

fn frozen_tensor_count(spec: &ModelSpec, dims: Dims, layers: usize) -> usize {
    if layers == 0 {
        return 0;
    }
    param_layout(spec, dims)
        .iter()
        .take_while(|(name, _)| {
            name.strip_prefix('l')
                .and_then(|rest| rest.split('.').next())
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| i < layers)
        })
        .count()
}
