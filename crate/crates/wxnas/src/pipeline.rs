//! Stage computations shared by the CLI and tests: data loading and
//! preparation, search, retraining, evaluation and baselines.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::Serialize;
use wxnas_core::dataset::{assemble_pooled, PreparedCity, ScalerParams, Segment, WindowedDataset};
use wxnas_core::metrics::{persistence_rmse, rmse, ClimatologyTable};
use wxnas_core::nas::{evolve, Executor, SearchBudget, SearchConfig, SearchResult, TrainingEvaluator};
use wxnas_core::nn::{train, Dims, Forecaster, ModelSpec, TrainConfig, TrainedModel};
use wxnas_core::rng::{derive_seed, fnv1a};
use wxnas_core::robustness::CALIBRATION_SHARE;
use wxnas_core::series::{CityRecord, HourlySeries, Role};
use wxnas_core::synthetic::{generate_synthetic_city, ClimateProfile};
use wxnas_core::{LOOKBACK, N_FEATURES};

use crate::cache::cache_get_or_fetch;
use crate::error::{AppError, Result};
use crate::ingest::ArchiveClient;

/// Named architectures for one-command reproduction.
pub const ARCH_ALIASES: [(&str, &str); 4] = [
    ("gru128x2", "gru128-gru128"),
    ("cnn128", "cnn128"),
    ("cnn32", "cnn32"),
    ("lstm64x2", "lstm64-lstm64"),
];

/// Resolves an alias or a descriptor such as `gru64-dense32@0.2`.
pub fn parse_arch(s: &str) -> Result<ModelSpec> {
    let s = s.trim();
    let desc = ARCH_ALIASES.iter().find(|(a, _)| *a == s).map_or(s, |(_, d)| d);
    Ok(desc.parse()?)
}

/// Synthetic generator profile standing in for a climate-zone tag.
pub fn profile_for_zone(zone: &str) -> ClimateProfile {
    match zone {
        "tropical" => ClimateProfile::Tropical,
        "arid" => ClimateProfile::Arid,
        _ => ClimateProfile::Temperate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated series of `hours` hours, seeded by city name.
    Synthetic { hours: usize },
    /// Archive data for the whole days `start..=end`.
    Real { start: NaiveDate, end: NaiveDate, cache_dir: PathBuf },
}

pub fn synthetic_series(city: &CityRecord, hours: usize) -> Result<HourlySeries> {
    let mut s = generate_synthetic_city(fnv1a(city.name.as_bytes()), hours, profile_for_zone(&city.climate_zone))?;
    s.city = city.clone();
    Ok(s)
}

pub fn load_series(source: &DataSource, city: &CityRecord, client: Option<&ArchiveClient>) -> Result<HourlySeries> {
    match source {
        DataSource::Synthetic { hours } => synthetic_series(city, *hours),
        DataSource::Real { start, end, cache_dir } => {
            let client = client.ok_or_else(|| AppError::Config("real data needs an archive client".into()))?;
            std::fs::create_dir_all(cache_dir).map_err(|e| AppError::io(cache_dir, e))?;
            cache_get_or_fetch(client, city, *start, *end, cache_dir)
        }
    }
}

/// Source cities split 70/15/15; target cities split into a 70% adaptation
/// pool and a 30% test segment.
pub struct PreparedData {
    pub sources: Vec<PreparedCity>,
    pub targets: Vec<PreparedCity>,
}

impl PreparedData {
    pub fn from_series(series: Vec<HourlySeries>) -> Result<Self> {
        let mut sources = Vec::new();
        let mut targets = Vec::new();
        for s in series {
            match s.city.role {
                Role::Source => sources.push(PreparedCity::source(s)?),
                Role::Target => targets.push(PreparedCity::target(s)?),
            }
        }
        if sources.is_empty() || targets.is_empty() {
            return Err(AppError::Config("need at least one source and one target city".into()));
        }
        Ok(Self { sources, targets })
    }

    pub fn load(source: &DataSource, cities: &[CityRecord], client: Option<&ArchiveClient>) -> Result<Self> {
        let series = cities.iter().map(|c| load_series(source, c, client)).collect::<Result<Vec<_>>>()?;
        Self::from_series(series)
    }

    pub fn dims(&self) -> Dims {
        Dims { lookback: LOOKBACK, features: N_FEATURES }
    }

    pub fn source(&self, segment: Segment) -> Result<WindowedDataset> {
        Ok(assemble_pooled(&self.sources, segment)?)
    }

    pub fn target_pool(&self) -> Result<WindowedDataset> {
        Ok(assemble_pooled(&self.targets, Segment::Train)?)
    }

    pub fn target_test(&self) -> Result<WindowedDataset> {
        Ok(assemble_pooled(&self.targets, Segment::Test)?)
    }

    /// Target test windows split chronologically per city: the first
    /// `CALIBRATION_SHARE` of each test segment calibrates, the rest evaluates.
    pub fn calibration_split(&self) -> Result<(WindowedDataset, WindowedDataset)> {
        let mut cal = WindowedDataset::empty(LOOKBACK, N_FEATURES);
        let mut eval = WindowedDataset::empty(LOOKBACK, N_FEATURES);
        for c in &self.targets {
            let test = c.split.range(Segment::Test);
            let cut = test.start + (test.len() as f64 * CALIBRATION_SHARE).floor() as usize;
            cal.extend(&c.windows_in(test.start..cut)?)?;
            eval.extend(&c.windows_in(cut..test.end)?)?;
        }
        Ok((cal, eval))
    }

    pub fn scalers(&self) -> Vec<&ScalerParams> {
        self.sources.iter().chain(&self.targets).map(|c| &c.scaler).collect()
    }

    pub fn source_scaler_ids(&self) -> Vec<String> {
        self.sources.iter().map(|c| c.scaler.city.clone()).collect()
    }

    /// CRC-32 over city names, roles and scaled values, as hex.
    pub fn fingerprint(&self) -> String {
        let mut h = crc32fast::Hasher::new();
        for c in self.sources.iter().chain(&self.targets) {
            h.update(c.series.city.name.as_bytes());
            h.update(c.series.city.role.as_str().as_bytes());
            h.update(&c.series.start_time.to_le_bytes());
            for v in c.scaled.as_slice() {
                h.update(&v.to_le_bytes());
            }
        }
        format!("{:08x}", h.finalize())
    }
}

/// Runs NSGA-II with candidates trained on a budget subsample of the pooled
/// source training windows and scored on pooled source validation windows.
pub fn run_search(
    data: &PreparedData,
    config: &SearchConfig,
    budget: &SearchBudget,
    executor: &dyn Executor,
) -> Result<SearchResult> {
    let train_set = budget.subsample(&data.source(Segment::Train)?, derive_seed(config.seed, 0x5ea7c4));
    let val_set = data.source(Segment::Val)?;
    log::info!(
        "search: {} training windows (budget), {} validation windows",
        train_set.len(),
        val_set.len()
    );
    let evaluator = TrainingEvaluator {
        train_set: &train_set,
        val_set: &val_set,
        config: budget.train.with_seed(config.seed),
        dims: data.dims(),
    };
    Ok(evolve(config, &evaluator, executor)?)
}

/// Full-protocol training on the pooled source train/val windows.
pub fn train_on_sources(data: &PreparedData, spec: &ModelSpec, config: &TrainConfig) -> Result<TrainedModel> {
    let mut model = train(spec, data.dims(), &data.source(Segment::Train)?, &data.source(Segment::Val)?, config)?;
    model.scaler_ids = data.source_scaler_ids();
    Ok(model)
}

pub fn evaluate_rmse<M: Forecaster + ?Sized>(model: &M, ds: &WindowedDataset) -> Result<f64> {
    Ok(rmse(&model.predict(&ds.x, ds.len())?, &ds.y)?)
}

pub fn persistence_on(ds: &WindowedDataset) -> Result<f64> {
    Ok(persistence_rmse(ds)?)
}

/// Climatology per target city, fitted on its scaled adaptation pool and
/// scored jointly on all target test windows.
pub fn climatology_rmse(data: &PreparedData) -> Result<f64> {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for c in &data.targets {
        let pool = c.split.range(Segment::Train);
        let rows = pool.filter(|&r| c.valid_rows[r]).map(|r| (c.series.timestamp(r), c.scaled.row(r)));
        let table = ClimatologyTable::fit(rows, N_FEATURES)?;
        let test = c.windows(Segment::Test)?;
        let times: Vec<i64> = (0..test.len()).map(|i| test.target_time(i)).collect();
        pred.extend(table.forecast(&times));
        truth.extend_from_slice(&test.y);
    }
    Ok(rmse(&pred, &truth)?)
}

/// Pooled per-horizon RMSE of recursive forecasts over target test segments.
/// Seed windows start at every `stride`-th row whose window and horizon lie
/// inside the segment and avoid unfilled gaps. Returns the RMSE per lead
/// time and the number of seed windows.
pub fn target_horizon_rmse<M: Forecaster + ?Sized>(
    model: &M,
    data: &PreparedData,
    horizon: usize,
    max_windows: usize,
) -> Result<(Vec<f64>, usize)> {
    let span = LOOKBACK + horizon;
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (ci, c) in data.targets.iter().enumerate() {
        let test = c.split.range(Segment::Test);
        let mut s = test.start;
        while s + span <= test.end {
            if c.valid_rows[s..s + span].iter().all(|&v| v) {
                candidates.push((ci, s));
            }
            s += 1;
        }
    }
    if candidates.is_empty() {
        return Err(AppError::Core(wxnas_core::Error::EmptyDataset(format!(
            "no target test window leaves room for a {horizon}-hour horizon"
        ))));
    }
    let stride = candidates.len().div_ceil(max_windows.max(1));
    let picked: Vec<(usize, usize)> = candidates.into_iter().step_by(stride).collect();
    let mut sq = vec![0.0; horizon];
    for (ci, c) in data.targets.iter().enumerate() {
        let starts: Vec<usize> = picked.iter().filter(|p| p.0 == ci).map(|p| p.1).collect();
        if starts.is_empty() {
            continue;
        }
        let r = wxnas_core::robustness::horizon_rmse(model, &c.scaled, &starts, horizon)?;
        for (acc, v) in sq.iter_mut().zip(r) {
            *acc += v * v * starts.len() as f64;
        }
    }
    let n = picked.len();
    Ok((sq.into_iter().map(|s| (s / n as f64).sqrt()).collect(), n))
}
