//! Pretrain on pooled source cities, then adapt to target cities from small
//! contiguous blocks of their adaptation pool, against from-scratch controls.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::dataset::{assemble_pooled, PreparedCity, Segment, WindowedDataset};
use crate::error::{Error, Result};
use crate::metrics::rmse;
use crate::nn::spec::{Dims, ModelSpec};
use crate::nn::train::{train, train_from, Forecaster, TrainConfig, TrainedModel};
use crate::rng::{derive_seed, seeded};
use crate::schema::LOOKBACK;
use crate::stats::{mean, paired_ttest, std_dev, wilcoxon_signed_rank, TestResult};

pub const DEFAULT_FRACTIONS: [f64; 4] = [0.01, 0.10, 0.50, 1.00];
pub const DEFAULT_TRIALS: usize = 10;
/// Trailing share of each block's windows held out for early stopping.
pub const BLOCK_VAL_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Protocol shared by scratch and fine-tune runs; its seed is replaced per trial.
    pub train: TrainConfig,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self { fractions: DEFAULT_FRACTIONS.to_vec(), trials: DEFAULT_TRIALS, seed: 0, train: TrainConfig::default() }
    }
}

pub fn pretrain(
    spec: &ModelSpec,
    dims: Dims,
    source_train: &WindowedDataset,
    source_val: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    train(spec, dims, source_train, source_val, config)
}

/// Continues training every weight from `pretrained`.
pub fn finetune(
    pretrained: &TrainedModel,
    train_set: &WindowedDataset,
    val_set: &WindowedDataset,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    let mut m = train_from(&pretrained.spec, pretrained.dims, pretrained.params.clone(), train_set, val_set, config)?;
    m.scaler_ids = pretrained.scaler_ids.clone();
    Ok(m)
}

/// Rows in a block covering `fraction` of a pool, rounded up.
pub fn block_rows(pool: usize, fraction: f64) -> usize {
    (libm::ceil(pool as f64 * fraction) as usize).min(pool)
}

/// One contiguous block per target city at a seeded random start.
pub fn draw_blocks<R: Rng + ?Sized>(targets: &[PreparedCity], fraction: f64, rng: &mut R) -> Result<Vec<Range<usize>>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::precondition("fraction must lie in (0, 1]"));
    }
    targets
        .iter()
        .map(|city| {
            let pool = city.split.range(Segment::Train);
            let rows = block_rows(pool.len(), fraction);
            if rows < LOOKBACK + 1 {
                return Err(Error::SegmentTooShort { segment: "adaptation block", rows, needed: LOOKBACK + 1 });
            }
            let start = pool.start + rng.random_range(0..=pool.len() - rows);
            Ok(start..start + rows)
        })
        .collect()
}

/// Fine-tuning windows for the blocks: each city's leading windows train, the
/// trailing [`BLOCK_VAL_SHARE`] validate.
pub fn block_datasets(targets: &[PreparedCity], blocks: &[Range<usize>]) -> Result<(WindowedDataset, WindowedDataset)> {
    let first = targets.first().ok_or_else(|| Error::EmptyDataset("no target cities".into()))?;
    let mut pooled = WindowedDataset::empty(LOOKBACK, first.scaled.cols());
    for (city, rows) in targets.iter().zip(blocks) {
        pooled.extend(&city.windows_in(rows.clone())?)?;
    }
    let (tr, va) = pooled.split_per_city(1.0 - BLOCK_VAL_SHARE);
    if tr.is_empty() || va.is_empty() {
        return Err(Error::EmptyDataset("adaptation block too small to hold out validation windows".into()));
    }
    Ok((tr, va))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub blocks: Vec<Range<usize>>,
    pub scratch_rmse: f64,
    pub transfer_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionResult {
    pub fraction: f64,
    /// Block rows summed over target cities.
    pub block_rows: usize,
    /// Training windows drawn from the blocks.
    pub train_windows: usize,
    pub trials: Vec<TrialResult>,
    pub scratch_mean: f64,
    pub scratch_std: f64,
    pub transfer_mean: f64,
    pub transfer_std: f64,
    pub improvement_pct: f64,
    /// Paired t-test over trials, `d = scratch − transfer`.
    pub ttest: TestResult,
    /// Signed-rank test over per-window errors averaged across trials.
    pub wilcoxon: TestResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub trials: usize,
    /// Adaptation pool rows summed over target cities.
    pub pool_rows: usize,
    pub test_windows: usize,
    pub fractions: Vec<FractionResult>,
}

fn window_errors(pred: &[f32], truth: &[f32], features: usize, acc: &mut [f64]) {
    for (i, (p, t)) in pred.chunks_exact(features).zip(truth.chunks_exact(features)).enumerate() {
        let se: f64 = p.iter().zip(t).map(|(&a, &b)| { let d = f64::from(a) - f64::from(b); d * d }).sum();
        acc[i] += se / features as f64;
    }
}

/// For every fraction and trial, trains a scratch and a fine-tuned model on
/// the same blocks with the same seed and scores both on the pooled target
/// test windows.
pub fn run_transfer_experiment(
    pretrained: &TrainedModel,
    targets: &[PreparedCity],
    config: &TransferConfig,
) -> Result<TransferReport> {
    if config.trials < 2 {
        return Err(Error::precondition("at least two trials are needed for a paired test"));
    }
    let test = assemble_pooled(targets, Segment::Test)?;
    let f = test.features;
    let pool_rows = targets.iter().map(|c| c.split.range(Segment::Train).len()).sum();
    let mut out = Vec::with_capacity(config.fractions.len());
    for (fi, &fraction) in config.fractions.iter().enumerate() {
        let mut trials = Vec::with_capacity(config.trials);
        let mut scratch_err = vec![0.0; test.len()];
        let mut transfer_err = vec![0.0; test.len()];
        let mut train_windows = 0;
        for trial in 0..config.trials {
            let seed = derive_seed(config.seed, (fi as u64) << 32 | trial as u64);
            let blocks = draw_blocks(targets, fraction, &mut seeded(derive_seed(seed, 1)))?;
            let (tr, va) = block_datasets(targets, &blocks)?;
            train_windows = tr.len();
            let cfg = config.train.with_seed(seed);
            let scratch = train(&pretrained.spec, pretrained.dims, &tr, &va, &cfg)?;
            let tuned = finetune(pretrained, &tr, &va, &cfg)?;
            let ps = scratch.predict(&test.x, test.len())?;
            let pt = tuned.predict(&test.x, test.len())?;
            window_errors(&ps, &test.y, f, &mut scratch_err);
            window_errors(&pt, &test.y, f, &mut transfer_err);
            trials.push(TrialResult {
                trial,
                seed,
                blocks,
                scratch_rmse: rmse(&ps, &test.y)?,
                transfer_rmse: rmse(&pt, &test.y)?,
            });
        }
        let s: Vec<f64> = trials.iter().map(|t| t.scratch_rmse).collect();
        let t: Vec<f64> = trials.iter().map(|t| t.transfer_rmse).collect();
        let scratch_mean = mean(&s);
        let transfer_mean = mean(&t);
        out.push(FractionResult {
            fraction,
            block_rows: trials[0].blocks.iter().map(|b| b.len()).sum(),
            train_windows,
            scratch_mean,
            scratch_std: std_dev(&s),
            transfer_mean,
            transfer_std: std_dev(&t),
            improvement_pct: (scratch_mean - transfer_mean) / scratch_mean * 100.0,
            ttest: paired_ttest(&s, &t)?,
            wilcoxon: wilcoxon_signed_rank(&scratch_err, &transfer_err)?,
            trials,
        });
    }
    Ok(TransferReport { trials: config.trials, pool_rows, test_windows: test.len(), fractions: out })
}
