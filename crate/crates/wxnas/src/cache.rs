//! On-disk cache of fetched series: one CSV file per (city, date range,
//! schema version).
//!
//! The first line records the schema version and range; the header row names
//! every column with its unit. A missing observation is an empty field.
//! Floats are written in shortest round-trip form, so a load reproduces the
//! stored values bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use wxnas_core::schema::SCHEMA_VERSION;
use wxnas_core::series::{CityRecord, HourlySeries, Matrix};
use wxnas_core::{Feature, N_FEATURES};

use crate::binio::temp_sibling;
use crate::cities::slug;
use crate::error::{AppError, Result};
use crate::ingest::{check_range, expected_hours, unix_midnight, ArchiveClient};

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M";

pub fn cache_path(dir: &Path, city: &CityRecord, start: NaiveDate, end: NaiveDate) -> PathBuf {
    dir.join(format!("{}_{start}_{end}_v{SCHEMA_VERSION}.csv", slug(&city.name)))
}

fn header_line(start: NaiveDate, end: NaiveDate) -> String {
    format!("# wxnas cache schema_version={SCHEMA_VERSION} start={start} end={end}")
}

/// Writes `series` to `path` atomically: a temporary sibling is written in
/// full and then renamed over the target.
pub fn write_series(path: &Path, series: &HourlySeries, start: NaiveDate, end: NaiveDate) -> Result<()> {
    let tmp = temp_sibling(path);
    let io = |e| AppError::io(&tmp, e);
    let mut file = fs::File::create(&tmp).map_err(io)?;
    writeln!(file, "{}", header_line(start, end)).map_err(io)?;
    {
        let mut w = csv::Writer::from_writer(&mut file);
        let mut header = vec!["time".to_string()];
        header.extend(Feature::ALL.iter().map(|f| format!("{} [{}]", f.name(), f.unit())));
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(N_FEATURES + 1);
        for r in 0..series.len() {
            record.clear();
            let t = DateTime::from_timestamp(series.timestamp(r), 0)
                .ok_or_else(|| AppError::Format(format!("timestamp of row {r} out of range")))?;
            record.push(t.format(TIME_FORMAT).to_string());
            for f in 0..N_FEATURES {
                record.push(if series.is_missing(r, f) { String::new() } else { series.values.get(r, f).to_string() });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(io)?;
    }
    file.sync_all().map_err(io)?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        AppError::io(path, e)
    })
}

/// Loads a cache file, validating its schema line, header, row count and
/// hourly contiguity.
pub fn read_series(path: &Path, city: &CityRecord, start: NaiveDate, end: NaiveDate) -> Result<HourlySeries> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| AppError::io(path, e))?;
    if first.trim_end() != header_line(start, end) {
        return Err(AppError::Format(format!("unexpected cache header `{}`", first.trim_end())));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let expected_cols = std::iter::once("time".to_string())
        .chain(Feature::ALL.iter().map(|f| format!("{} [{}]", f.name(), f.unit())));
    if !header.iter().map(str::to_string).eq(expected_cols) {
        return Err(AppError::Format("cache column header does not match the feature schema".into()));
    }
    let n = expected_hours(start, end);
    let start_time = unix_midnight(start);
    let mut data = Vec::with_capacity(n * N_FEATURES);
    let mut missing = Vec::with_capacity(n * N_FEATURES);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != N_FEATURES + 1 {
            return Err(AppError::Format(format!("row {rows} has {} fields", rec.len())));
        }
        let t = chrono::NaiveDateTime::parse_from_str(&rec[0], TIME_FORMAT)
            .map_err(|_| AppError::Format(format!("row {rows}: bad time `{}`", &rec[0])))?;
        if t.and_utc().timestamp() != start_time + rows as i64 * 3600 {
            return Err(AppError::Format(format!("row {rows}: time {t} breaks hourly contiguity")));
        }
        for field in rec.iter().skip(1) {
            if field.is_empty() {
                data.push(f64::NAN);
                missing.push(true);
            } else {
                let v: f64 =
                    field.parse().map_err(|_| AppError::Format(format!("row {rows}: bad number `{field}`")))?;
                data.push(v);
                missing.push(false);
            }
        }
        rows += 1;
    }
    if rows != n {
        return Err(AppError::Format(format!("cache holds {rows} rows, expected {n}")));
    }
    Ok(HourlySeries::new(city.clone(), start_time, Matrix::from_vec(n, N_FEATURES, data)?, missing)?)
}

/// Returns the cached series for the key when it loads cleanly; otherwise
/// fetches, stores and returns it. An unreadable cache file is removed and
/// replaced.
pub fn cache_get_or_fetch(
    client: &ArchiveClient,
    city: &CityRecord,
    start: NaiveDate,
    end: NaiveDate,
    cache_dir: &Path,
) -> Result<HourlySeries> {
    check_range(start, end)?;
    let path = cache_path(cache_dir, city, start, end);
    if path.exists() {
        match read_series(&path, city, start, end) {
            Ok(s) => {
                log::debug!("cache hit {}", path.display());
                return Ok(s);
            }
            Err(e) => {
                log::warn!("discarding corrupt cache file {}: {e}", path.display());
                fs::remove_file(&path).map_err(|e| AppError::io(&path, e))?;
            }
        }
    }
    let series = client.fetch_city_history(city, start, end)?;
    write_series(&path, &series, start, end)?;
    Ok(series)
}
