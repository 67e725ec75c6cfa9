//! Per-city min-max scaling, sliding windows, chronological splits and pooled
//! multi-city datasets.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::schema::{LOOKBACK, N_FEATURES};
use crate::series::{HourlySeries, Matrix};

/// Longest run of missing hours that is linearly interpolated before windowing.
pub const MAX_INTERPOLATED_GAP: usize = 6;

/// Default chronological split ratios.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

/// Share of a target city's record used as the adaptation pool; the rest is test.
pub const TARGET_ADAPTATION_FRACTION: f64 = 0.70;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalerParams {
    pub city: String,
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl ScalerParams {
    pub fn is_degenerate(&self, feature: usize) -> bool {
        self.min[feature] == self.max[feature]
    }

    pub fn degenerate_features(&self) -> Vec<usize> {
        (0..N_FEATURES).filter(|&f| self.is_degenerate(f)).collect()
    }

    #[inline]
    pub fn scale(&self, feature: usize, x: f64) -> f64 {
        let span = self.max[feature] - self.min[feature];
        if span == 0.0 {
            0.0
        } else {
            (x - self.min[feature]) / span
        }
    }

    #[inline]
    pub fn unscale(&self, feature: usize, s: f64) -> f64 {
        self.min[feature] + s * (self.max[feature] - self.min[feature])
    }
}

/// Fits per-feature min/max over `train_rows` only, skipping missing cells.
/// A feature with no observed value in range is treated as degenerate at 0.
pub fn fit_scaler(series: &HourlySeries, train_rows: Range<usize>) -> Result<ScalerParams> {
    if train_rows.is_empty() || train_rows.end > series.len() {
        return Err(Error::Precondition(format!(
            "scaler range {train_rows:?} is empty or outside a {}-row series",
            series.len()
        )));
    }
    let mut min = [f64::INFINITY; N_FEATURES];
    let mut max = [f64::NEG_INFINITY; N_FEATURES];
    for r in train_rows {
        let row = series.values.row(r);
        for f in 0..N_FEATURES {
            if series.is_missing(r, f) {
                continue;
            }
            min[f] = min[f].min(row[f]);
            max[f] = max[f].max(row[f]);
        }
    }
    for f in 0..N_FEATURES {
        if !min[f].is_finite() {
            min[f] = 0.0;
            max[f] = 0.0;
        }
    }
    Ok(ScalerParams { city: series.city.name.clone(), min, max })
}

/// `(x - min) / (max - min)` per feature. Degenerate features map to 0 and
/// values outside the fitted range are not clipped.
pub fn apply_scaler(values: &Matrix, params: &ScalerParams) -> Result<Matrix> {
    check_schema(values)?;
    let mut out = Matrix::zeros(values.rows(), N_FEATURES);
    for r in 0..values.rows() {
        let src = values.row(r);
        let dst = out.row_mut(r);
        for f in 0..N_FEATURES {
            dst[f] = params.scale(f, src[f]);
        }
    }
    Ok(out)
}

pub fn inverse_scaler(scaled: &Matrix, params: &ScalerParams) -> Result<Matrix> {
    check_schema(scaled)?;
    let mut out = Matrix::zeros(scaled.rows(), N_FEATURES);
    for r in 0..scaled.rows() {
        let src = scaled.row(r);
        let dst = out.row_mut(r);
        for f in 0..N_FEATURES {
            dst[f] = params.unscale(f, src[f]);
        }
    }
    Ok(out)
}

fn check_schema(m: &Matrix) -> Result<()> {
    if m.cols() != N_FEATURES {
        return Err(Error::Shape(format!(
            "matrix has {} columns, schema has {N_FEATURES}",
            m.cols()
        )));
    }
    Ok(())
}

/// Where a window came from: `row` is the first input row in the city's
/// series; the target row is `row + lookback`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowOrigin {
    pub city: u32,
    pub row: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityTag {
    pub name: String,
    /// Unix seconds of row 0.
    pub start_time: i64,
}

/// Supervised pairs: `x` is `[N × lookback × features]`, `y` is `[N × features]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub lookback: usize,
    pub features: usize,
    pub x: Vec<f32>,
    pub y: Vec<f32>,
    pub origins: Vec<WindowOrigin>,
    pub cities: Vec<CityTag>,
}

impl WindowedDataset {
    pub fn empty(lookback: usize, features: usize) -> Self {
        Self { lookback, features, x: Vec::new(), y: Vec::new(), origins: Vec::new(), cities: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn window_size(&self) -> usize {
        self.lookback * self.features
    }

    pub fn window(&self, i: usize) -> &[f32] {
        let w = self.window_size();
        &self.x[i * w..(i + 1) * w]
    }

    pub fn target(&self, i: usize) -> &[f32] {
        &self.y[i * self.features..(i + 1) * self.features]
    }

    /// Unix timestamp of window `i`'s target hour.
    pub fn target_time(&self, i: usize) -> i64 {
        let o = self.origins[i];
        self.cities[o.city as usize].start_time
            + (o.row as i64 + self.lookback as i64) * crate::calendar::SECONDS_PER_HOUR
    }

    /// New dataset holding the given windows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let w = self.window_size();
        let mut out = Self {
            lookback: self.lookback,
            features: self.features,
            x: Vec::with_capacity(indices.len() * w),
            y: Vec::with_capacity(indices.len() * self.features),
            origins: Vec::with_capacity(indices.len()),
            cities: self.cities.clone(),
        };
        for &i in indices {
            out.x.extend_from_slice(self.window(i));
            out.y.extend_from_slice(self.target(i));
            out.origins.push(self.origins[i]);
        }
        out
    }

    /// Appends `other`, re-indexing its city tags.
    pub fn extend(&mut self, other: &WindowedDataset) -> Result<()> {
        if other.lookback != self.lookback || other.features != self.features {
            return Err(Error::Shape("cannot concatenate datasets with different window shapes".into()));
        }
        let offset = self.cities.len() as u32;
        self.cities.extend(other.cities.iter().cloned());
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
        self.origins
            .extend(other.origins.iter().map(|o| WindowOrigin { city: o.city + offset, row: o.row }));
        Ok(())
    }

    /// Seeded random subset of `ceil(fraction * N)` windows (at least one),
    /// kept in original order.
    pub fn subsample(&self, fraction: f64, seed: u64) -> Self {
        if fraction >= 1.0 || self.is_empty() {
            return self.clone();
        }
        self.sample_windows(libm::ceil(self.len() as f64 * fraction) as usize, seed)
    }

    /// Seeded random subset of `count` windows (clamped to `1..=N`), kept in
    /// original order.
    pub fn sample_windows(&self, count: usize, seed: u64) -> Self {
        if count >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seeded(seed));
        idx.truncate(count.max(1));
        idx.sort_unstable();
        self.select(&idx)
    }

    /// Splits every city's windows chronologically: the first `head_fraction`
    /// (rounded down) of each city's windows go to the first dataset.
    pub fn split_per_city(&self, head_fraction: f64) -> (Self, Self) {
        let mut head = Vec::new();
        let mut tail = Vec::new();
        for c in 0..self.cities.len() as u32 {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.origins[i].city == c).collect();
            idx.sort_by_key(|&i| self.origins[i].row);
            let cut = libm::floor(idx.len() as f64 * head_fraction) as usize;
            head.extend_from_slice(&idx[..cut]);
            tail.extend_from_slice(&idx[cut..]);
        }
        (self.select(&head), self.select(&tail))
    }
}

/// Sliding windows over a whole scaled matrix: window `i` reads rows
/// `[i, i + lookback)` and predicts row `i + lookback`.
pub fn make_windows(scaled: &Matrix, lookback: usize) -> Result<WindowedDataset> {
    windows_in_range(scaled, None, 0..scaled.rows(), lookback, CityTag { name: String::new(), start_time: 0 })
}

/// Windows fully inside `rows`, skipping any window that touches an invalid row.
pub fn windows_in_range(
    scaled: &Matrix,
    valid_rows: Option<&[bool]>,
    rows: Range<usize>,
    lookback: usize,
    city: CityTag,
) -> Result<WindowedDataset> {
    check_schema(scaled)?;
    let n = rows.len();
    if lookback == 0 || n <= lookback {
        return Err(Error::EmptyDataset(format!(
            "{n} rows cannot form a window of lookback {lookback} plus one target"
        )));
    }
    let f = scaled.cols();
    let mut ds = WindowedDataset::empty(lookback, f);
    ds.cities.push(city);
    let count = n - lookback;
    ds.x.reserve(count * lookback * f);
    ds.y.reserve(count * f);
    // Rows until the next invalid one, so each window check is O(1).
    let mut run_ok = vec![0usize; n + 1];
    for k in (0..n).rev() {
        let ok = valid_rows.map_or(true, |v| v[rows.start + k]);
        run_ok[k] = if ok { run_ok[k + 1] + 1 } else { 0 };
    }
    for k in 0..count {
        if run_ok[k] < lookback + 1 {
            continue;
        }
        let start = rows.start + k;
        for r in start..start + lookback {
            ds.x.extend(scaled.row(r).iter().map(|&v| v as f32));
        }
        ds.y.extend(scaled.row(start + lookback).iter().map(|&v| v as f32));
        ds.origins.push(WindowOrigin { city: 0, row: start as u32 });
    }
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Train,
    Val,
    Test,
}

impl Segment {
    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Train => "train",
            Segment::Val => "val",
            Segment::Test => "test",
        }
    }
}

/// Chronological row boundaries: train `[0, train_end)`, val
/// `[train_end, val_end)`, test `[val_end, n_rows)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub n_rows: usize,
    pub train_end: usize,
    pub val_end: usize,
}

impl SplitSpec {
    pub fn range(&self, segment: Segment) -> Range<usize> {
        match segment {
            Segment::Train => 0..self.train_end,
            Segment::Val => self.train_end..self.val_end,
            Segment::Test => self.val_end..self.n_rows,
        }
    }

    /// Target-city layout: the first `adaptation` share is the pool for
    /// fine-tuning (reported as `Train`), the remainder is `Test`, and `Val`
    /// is empty.
    pub fn target_layout(n_rows: usize, adaptation: f64, lookback: usize) -> Result<Self> {
        if !(adaptation > 0.0 && adaptation < 1.0) {
            return Err(Error::precondition("adaptation fraction must lie in (0, 1)"));
        }
        let cut = libm::floor(n_rows as f64 * adaptation) as usize;
        let spec = SplitSpec { fractions: [adaptation, 0.0, 1.0 - adaptation], n_rows, train_end: cut, val_end: cut };
        spec.check_segment("adaptation", cut, lookback)?;
        spec.check_segment("test", n_rows - cut, lookback)?;
        Ok(spec)
    }

    fn check_segment(&self, name: &'static str, rows: usize, lookback: usize) -> Result<()> {
        if rows < lookback + 1 {
            return Err(Error::SegmentTooShort { segment: name, rows, needed: lookback + 1 });
        }
        Ok(())
    }
}

/// Boundaries at the cumulative fractions, rounded down. Every segment must
/// hold at least `lookback + 1` rows.
pub fn chronological_split(n_rows: usize, fractions: [f64; 3], lookback: usize) -> Result<SplitSpec> {
    if fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::precondition("split fractions must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("split fractions sum to {total}, not 1")));
    }
    let train_end = libm::floor(n_rows as f64 * fractions[0]) as usize;
    let val_end = (libm::floor(n_rows as f64 * (fractions[0] + fractions[1])) as usize).max(train_end);
    let spec = SplitSpec { fractions, n_rows, train_end, val_end };
    spec.check_segment("train", train_end, lookback)?;
    spec.check_segment("val", val_end - train_end, lookback)?;
    spec.check_segment("test", n_rows - val_end, lookback)?;
    Ok(spec)
}

/// A city ready for windowing: short gaps filled, scaler fitted on the
/// training segment only, and a row-validity mask for remaining gaps.
#[derive(Debug, Clone)]
pub struct PreparedCity {
    pub series: HourlySeries,
    pub scaler: ScalerParams,
    pub split: SplitSpec,
    pub scaled: Matrix,
    pub valid_rows: Vec<bool>,
}

impl PreparedCity {
    pub fn new(mut series: HourlySeries, split: SplitSpec) -> Result<Self> {
        if split.n_rows != series.len() {
            return Err(Error::shape("split does not match series length"));
        }
        series.interpolate_short_gaps(MAX_INTERPOLATED_GAP);
        let scaler = fit_scaler(&series, split.range(Segment::Train))?;
        let scaled = apply_scaler(&series.values, &scaler)?;
        let valid_rows = (0..series.len()).map(|r| series.row_complete(r)).collect();
        Ok(Self { series, scaler, split, scaled, valid_rows })
    }

    /// Source-city preparation with the default 70/15/15 split.
    pub fn source(series: HourlySeries) -> Result<Self> {
        let split = chronological_split(series.len(), DEFAULT_FRACTIONS, LOOKBACK)?;
        Self::new(series, split)
    }

    /// Target-city preparation: 70% adaptation pool, 30% test.
    pub fn target(series: HourlySeries) -> Result<Self> {
        let split = SplitSpec::target_layout(series.len(), TARGET_ADAPTATION_FRACTION, LOOKBACK)?;
        Self::new(series, split)
    }

    pub fn tag(&self) -> CityTag {
        CityTag { name: self.series.city.name.clone(), start_time: self.series.start_time }
    }

    pub fn windows(&self, segment: Segment) -> Result<WindowedDataset> {
        self.windows_in(self.split.range(segment))
    }

    pub fn windows_in(&self, rows: Range<usize>) -> Result<WindowedDataset> {
        windows_in_range(&self.scaled, Some(&self.valid_rows), rows, LOOKBACK, self.tag())
    }
}

/// Concatenates each city's windows for `segment`, each city scaled by its own
/// parameters, preserving origins.
pub fn assemble_pooled(cities: &[PreparedCity], segment: Segment) -> Result<WindowedDataset> {
    let first = cities.first().ok_or_else(|| Error::EmptyDataset("no cities to pool".into()))?;
    let mut pooled = WindowedDataset::empty(LOOKBACK, first.scaled.cols());
    for city in cities {
        pooled.extend(&city.windows(segment)?)?;
    }
    Ok(pooled)
}
