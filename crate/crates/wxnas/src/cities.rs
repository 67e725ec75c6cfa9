//! City list configuration (TOML) and the shipped default list.

use std::path::Path;

use serde::Deserialize;
use wxnas_core::series::{validate_roles, CityRecord, Role};

use crate::error::{AppError, Result};

const DEFAULT_CITIES: &str = include_str!("cities.toml");

#[derive(Debug, Deserialize)]
struct CityFile {
    city: Vec<CityEntry>,
}

#[derive(Debug, Deserialize)]
struct CityEntry {
    name: String,
    latitude: f64,
    longitude: f64,
    climate_zone: String,
    role: String,
}

pub fn parse_cities(text: &str) -> Result<Vec<CityRecord>> {
    let file: CityFile = toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
    let cities = file
        .city
        .into_iter()
        .map(|c| {
            let role = Role::parse(&c.role)
                .ok_or_else(|| AppError::Config(format!("city `{}`: unknown role `{}`", c.name, c.role)))?;
            Ok(CityRecord::new(c.name, c.latitude, c.longitude, c.climate_zone, role)?)
        })
        .collect::<Result<Vec<_>>>()?;
    validate_roles(&cities)?;
    Ok(cities)
}

pub fn default_cities() -> Vec<CityRecord> {
    parse_cities(DEFAULT_CITIES).expect("shipped city list is valid")
}

pub fn load_cities(path: &Path) -> Result<Vec<CityRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_cities(&text)
}

/// Keeps the named cities (all when `names` is empty), in list order.
pub fn select_cities(all: &[CityRecord], names: &[String]) -> Result<Vec<CityRecord>> {
    if names.is_empty() {
        return Ok(all.to_vec());
    }
    for n in names {
        if !all.iter().any(|c| c.name.eq_ignore_ascii_case(n)) {
            return Err(AppError::Config(format!("unknown city `{n}`")));
        }
    }
    let picked: Vec<CityRecord> =
        all.iter().filter(|c| names.iter().any(|n| c.name.eq_ignore_ascii_case(n))).cloned().collect();
    validate_roles(&picked)?;
    Ok(picked)
}

/// Filesystem-safe lowercase name.
pub fn slug(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for ch in name.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !ch.is_ascii() {
            out.push_str(&format!("u{:x}", ch as u32));
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}
