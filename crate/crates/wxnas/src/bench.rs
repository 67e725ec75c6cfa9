//! Single-window inference latency and artifact size measurement.

use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use wxnas_core::nn::{Forecaster, TrainedModel};
use wxnas_core::rng::{seeded, standard_normal};

use crate::error::{AppError, Result};
use crate::model_file::model_size;

pub const DEFAULT_WARMUP: usize = 100;
pub const DEFAULT_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub model_id: String,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub size_bytes: Option<u64>,
    pub param_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
}

/// Summarizes per-call timings: arithmetic mean, median, and nearest-rank
/// 95th percentile.
pub fn latency_stats(samples_ms: &[f64]) -> Result<LatencyStats> {
    if samples_ms.is_empty() {
        return Err(AppError::Config("no timing samples".into()));
    }
    let mut s = samples_ms.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Ok(LatencyStats { mean_ms: s.iter().sum::<f64>() / n as f64, median_ms: median, p95_ms: s[rank - 1] })
}

/// Times `iters` batch-of-one predictions after `warmup` untimed calls, all
/// on the calling thread.
pub fn time_inference<M: Forecaster + ?Sized>(model: &M, warmup: usize, iters: usize) -> Result<LatencyStats> {
    if iters == 0 {
        return Err(AppError::Config("latency benchmark needs at least one timed iteration".into()));
    }
    let dims = model.dims();
    let mut rng = seeded(0xbe9c);
    let window: Vec<f32> =
        (0..dims.lookback * dims.features).map(|_| 0.5 + 0.2 * standard_normal(&mut rng) as f32).collect();
    for _ in 0..warmup {
        black_box(model.predict(black_box(&window), 1)?);
    }
    let mut samples = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t0 = Instant::now();
        black_box(model.predict(black_box(&window), 1)?);
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    latency_stats(&samples)
}

pub fn measure_latency(
    model_id: &str,
    model: &TrainedModel,
    artifact: Option<&Path>,
    warmup: usize,
    iters: usize,
) -> Result<BenchResult> {
    let stats = time_inference(model, warmup, iters)?;
    Ok(BenchResult {
        model_id: model_id.to_string(),
        mean_ms: stats.mean_ms,
        median_ms: stats.median_ms,
        p95_ms: stats.p95_ms,
        size_bytes: artifact.map(model_size).transpose()?,
        param_count: model.param_count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub cpu_model: Option<String>,
}

pub fn host_info() -> HostInfo {
    let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
        s.lines()
            .find(|l| l.starts_with("model name"))
            .and_then(|l| l.split_once(':'))
            .map(|(_, v)| v.trim().to_string())
    });
    HostInfo {
        os: std::env::consts::OS.to_string(),
        arch: std::env::consts::ARCH.to_string(),
        logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        cpu_model,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistics() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let st = latency_stats(&s).unwrap();
        assert_eq!(st.median_ms, 50.5);
        assert_eq!(st.p95_ms, 95.0);
        assert_eq!(st.mean_ms, 50.5);
        let one = latency_stats(&[2.0]).unwrap();
        assert_eq!((one.median_ms, one.p95_ms), (2.0, 2.0));
        assert!(latency_stats(&[]).is_err());
    }
}
