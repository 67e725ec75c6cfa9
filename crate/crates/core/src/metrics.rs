//! Error metrics and the two statistical baselines: persistence and
//! calendar climatology.

use alloc::vec;
use alloc::vec::Vec;

use crate::calendar::month_hour;
use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::nn::spec::Dims;
use crate::nn::train::Forecaster;

fn check_pair(pred_len: usize, truth_len: usize) -> Result<()> {
    if pred_len != truth_len {
        return Err(Error::shape(alloc::format!("prediction has {pred_len} values, truth has {truth_len}")));
    }
    if pred_len == 0 {
        return Err(Error::EmptyDataset("cannot score an empty prediction".into()));
    }
    Ok(())
}

/// Root mean squared error pooled over every element.
pub fn rmse<T: Copy + Into<f64>>(pred: &[T], truth: &[T]) -> Result<f64> {
    check_pair(pred.len(), truth.len())?;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let d = p.into() - t.into();
            d * d
        })
        .sum();
    Ok(libm::sqrt(sum / pred.len() as f64))
}

/// RMSE of each column of row-major `[B × features]` arrays.
pub fn per_feature_rmse<T: Copy + Into<f64>>(pred: &[T], truth: &[T], features: usize) -> Result<Vec<f64>> {
    check_pair(pred.len(), truth.len())?;
    if features == 0 || pred.len() % features != 0 {
        return Err(Error::shape("length is not a multiple of the feature count"));
    }
    let mut sums = vec![0.0; features];
    for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        let d = p.into() - t.into();
        sums[i % features] += d * d;
    }
    let rows = (pred.len() / features) as f64;
    Ok(sums.into_iter().map(|s| libm::sqrt(s / rows)).collect())
}

/// The last input row of every window: `x_{t+1} = x_t`.
pub fn persistence_forecast(x: &[f32], lookback: usize, features: usize) -> Result<Vec<f32>> {
    let w = lookback * features;
    if w == 0 || x.is_empty() || x.len() % w != 0 {
        return Err(Error::shape("input is not a whole number of nonempty windows"));
    }
    Ok(x.chunks_exact(w).flat_map(|win| win[w - features..].iter().copied()).collect())
}

pub fn persistence_rmse(ds: &WindowedDataset) -> Result<f64> {
    let pred = persistence_forecast(&ds.x, ds.lookback, ds.features)?;
    rmse(&pred, &ds.y)
}

/// Persistence as a [`Forecaster`], so it can stand in for a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Persistence {
    pub dims: Dims,
}

impl Forecaster for Persistence {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn predict(&self, x: &[f32], batch: usize) -> Result<Vec<f32>> {
        if x.len() != batch * self.dims.lookback * self.dims.features {
            return Err(Error::shape("input does not hold `batch` windows"));
        }
        persistence_forecast(x, self.dims.lookback, self.dims.features)
    }
}

const MONTHS: usize = 12;
const HOURS: usize = 24;

/// Mean of each feature per (month, hour-of-day) cell, in UTC.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimatologyTable {
    pub features: usize,
    /// `[12 × 24 × features]`, month-major.
    pub means: Vec<f64>,
    pub counts: Vec<u32>,
    pub global_mean: Vec<f64>,
}

impl ClimatologyTable {
    /// Fits on `(unix timestamp, row)` pairs. Empty cells fall back to the
    /// global per-feature mean.
    pub fn fit<'a, I>(rows: I, features: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, &'a [f64])>,
    {
        let mut sums = vec![0.0; MONTHS * HOURS * features];
        let mut counts = vec![0u32; MONTHS * HOURS];
        let mut total = vec![0.0; features];
        let mut n = 0usize;
        for (t, row) in rows {
            if row.len() != features {
                return Err(Error::shape("row width differs from feature count"));
            }
            let cell = Self::cell(t);
            counts[cell] += 1;
            for (f, &v) in row.iter().enumerate() {
                sums[cell * features + f] += v;
                total[f] += v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyDataset("climatology needs at least one training row".into()));
        }
        let global_mean: Vec<f64> = total.iter().map(|s| s / n as f64).collect();
        let mut means = sums;
        for cell in 0..MONTHS * HOURS {
            for f in 0..features {
                let m = &mut means[cell * features + f];
                *m = if counts[cell] == 0 { global_mean[f] } else { *m / f64::from(counts[cell]) };
            }
        }
        Ok(Self { features, means, counts, global_mean })
    }

    fn cell(t: i64) -> usize {
        let (month, hour) = month_hour(t);
        (month as usize - 1) * HOURS + hour as usize
    }

    pub fn predict_one(&self, t: i64) -> &[f64] {
        let c = Self::cell(t);
        &self.means[c * self.features..(c + 1) * self.features]
    }

    /// `[times.len() × features]` predictions.
    pub fn forecast(&self, times: &[i64]) -> Vec<f32> {
        times.iter().flat_map(|&t| self.predict_one(t).iter().map(|&v| v as f32)).collect()
    }
}
