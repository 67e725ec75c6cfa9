//! City metadata and contiguous hourly multivariate records.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::calendar::SECONDS_PER_HOUR;
use crate::error::{Error, Result};
use crate::schema::N_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    Target,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Source => "source",
            Role::Target => "target",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "source" => Some(Role::Source),
            "target" => Some(Role::Target),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityRecord {
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    /// Köppen group tag, e.g. `temperate`.
    pub climate_zone: String,
    pub role: Role,
}

impl CityRecord {
    pub fn new(
        name: impl Into<String>,
        latitude: f64,
        longitude: f64,
        climate_zone: impl Into<String>,
        role: Role,
    ) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::precondition(alloc::format!("latitude {latitude} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::precondition(alloc::format!(
                "longitude {longitude} outside [-180, 180]"
            )));
        }
        Ok(Self {
            name: name.into(),
            latitude,
            longitude,
            climate_zone: climate_zone.into(),
            role,
        })
    }
}

/// Checks that a configured city list splits into nonempty source and target sets.
pub fn validate_roles(cities: &[CityRecord]) -> Result<()> {
    let sources = cities.iter().filter(|c| c.role == Role::Source).count();
    let targets = cities.len() - sources;
    if sources == 0 || targets == 0 {
        return Err(Error::precondition(alloc::format!(
            "city list needs both roles, got {sources} source and {targets} target cities"
        )));
    }
    Ok(())
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(alloc::format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, c))
    }
}

/// One city's hourly record. Row `i` is the hour `start_time + i * 3600`.
///
/// Gaps are never represented by omitting rows; a missing observation keeps its
/// row and is flagged in `missing`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub city: CityRecord,
    /// Unix seconds, aligned to a whole hour.
    pub start_time: i64,
    pub values: Matrix,
    /// Row-major `[n_hours × 8]`.
    pub missing: Vec<bool>,
}

impl HourlySeries {
    pub fn new(city: CityRecord, start_time: i64, values: Matrix, missing: Vec<bool>) -> Result<Self> {
        if start_time.rem_euclid(SECONDS_PER_HOUR) != 0 {
            return Err(Error::precondition("start time is not aligned to a whole hour"));
        }
        if values.cols() != N_FEATURES {
            return Err(Error::shape(alloc::format!(
                "series has {} columns, schema has {N_FEATURES}",
                values.cols()
            )));
        }
        if missing.len() != values.rows() * N_FEATURES {
            return Err(Error::shape("missing mask does not match value matrix"));
        }
        Ok(Self { city, start_time, values, missing })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn timestamp(&self, row: usize) -> i64 {
        self.start_time + row as i64 * SECONDS_PER_HOUR
    }

    pub fn is_missing(&self, row: usize, feature: usize) -> bool {
        self.missing[row * N_FEATURES + feature]
    }

    pub fn row_complete(&self, row: usize) -> bool {
        !self.missing[row * N_FEATURES..(row + 1) * N_FEATURES].iter().any(|&m| m)
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Fills interior gaps of at most `max_gap` consecutive hours by linear
    /// interpolation, per feature. Longer gaps and gaps touching either end of
    /// the series stay flagged. Returns the number of filled cells.
    pub fn interpolate_short_gaps(&mut self, max_gap: usize) -> usize {
        let n = self.len();
        let mut filled = 0;
        for f in 0..N_FEATURES {
            let mut r = 0;
            while r < n {
                if !self.is_missing(r, f) {
                    r += 1;
                    continue;
                }
                let gap_start = r;
                while r < n && self.is_missing(r, f) {
                    r += 1;
                }
                let gap_len = r - gap_start;
                if gap_start == 0 || r == n || gap_len > max_gap {
                    continue;
                }
                let lo = self.values.get(gap_start - 1, f);
                let hi = self.values.get(r, f);
                for (k, row) in (gap_start..r).enumerate() {
                    let w = (k + 1) as f64 / (gap_len + 1) as f64;
                    self.values.set(row, f, lo + (hi - lo) * w);
                    self.missing[row * N_FEATURES + f] = false;
                    filled += 1;
                }
            }
        }
        filled
    }
}
