//! Deterministic synthetic weather records for offline runs and tests.
//!
//! Temperature is an annual sinusoid plus a diurnal sinusoid plus AR(1) noise.
//! Pressure moves against temperature, radiation follows the sun and is zero
//! at night, and the remaining channels are noisy latent processes clamped to
//! physical ranges.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::rng::{seeded, standard_normal};
use crate::schema::N_FEATURES;
use crate::series::{CityRecord, HourlySeries, Matrix, Role};
use rand::Rng;

pub const MIN_SYNTHETIC_HOURS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClimateProfile {
    Temperate,
    Tropical,
    Arid,
}

impl ClimateProfile {
    pub const ALL: [ClimateProfile; 3] = [
        ClimateProfile::Temperate,
        ClimateProfile::Tropical,
        ClimateProfile::Arid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClimateProfile::Temperate => "temperate",
            ClimateProfile::Tropical => "tropical",
            ClimateProfile::Arid => "arid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ClimateProfile::ALL.into_iter().find(|p| p.as_str() == s)
    }

    fn params(self) -> Params {
        match self {
            ClimateProfile::Temperate => Params {
                temp_mean: 12.0,
                annual_amp: 10.0,
                diurnal_amp: 4.5,
                humidity_base: 72.0,
                pressure_base: 1012.0,
                cloud_bias: 0.2,
                rain_prob: 0.35,
                radiation_peak: 850.0,
                wind_base: 12.0,
            },
            ClimateProfile::Tropical => Params {
                temp_mean: 27.0,
                annual_amp: 2.0,
                diurnal_amp: 4.0,
                humidity_base: 80.0,
                pressure_base: 1008.0,
                cloud_bias: 0.5,
                rain_prob: 0.5,
                radiation_peak: 1000.0,
                wind_base: 9.0,
            },
            ClimateProfile::Arid => Params {
                temp_mean: 22.0,
                annual_amp: 8.0,
                diurnal_amp: 8.5,
                humidity_base: 35.0,
                pressure_base: 1005.0,
                cloud_bias: -1.5,
                rain_prob: 0.08,
                radiation_peak: 1050.0,
                wind_base: 15.0,
            },
        }
    }
}

struct Params {
    temp_mean: f64,
    annual_amp: f64,
    diurnal_amp: f64,
    humidity_base: f64,
    pressure_base: f64,
    cloud_bias: f64,
    rain_prob: f64,
    radiation_peak: f64,
    wind_base: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Generates `n_hours` of synthetic hourly data starting 2019-01-01T00:00Z.
pub fn generate_synthetic_city(seed: u64, n_hours: usize, profile: ClimateProfile) -> Result<HourlySeries> {
    if n_hours < MIN_SYNTHETIC_HOURS {
        return Err(Error::Precondition(format!(
            "synthetic series needs at least {MIN_SYNTHETIC_HOURS} hours, got {n_hours}"
        )));
    }
    let p = profile.params();
    let mut rng = seeded(seed);
    let mut data = Vec::with_capacity(n_hours * N_FEATURES);

    let mut temp_ar = 0.0;
    let mut pressure_ar = 0.0;
    let mut cloud_ar = 0.0;
    let mut wind_ar = 0.0;
    let mut dir_ar = 0.0;
    let dir_base: f64 = rng.random_range(0.0..360.0);

    for h in 0..n_hours {
        let day = (h / 24) as f64;
        let hour = (h % 24) as f64;

        let annual = p.annual_amp * libm::sin(TAU * (day - 105.0) / 365.25);
        let diurnal = p.diurnal_amp * libm::sin(TAU * (hour - 9.0) / 24.0);
        temp_ar = 0.97 * temp_ar + 0.5 * standard_normal(&mut rng);
        let temperature = p.temp_mean + annual + diurnal + temp_ar + 0.3 * standard_normal(&mut rng);

        pressure_ar = 0.99 * pressure_ar + 0.35 * standard_normal(&mut rng);
        let surface_pressure = p.pressure_base - 0.4 * (annual + temp_ar) - 0.15 * diurnal
            + pressure_ar
            + 0.4 * standard_normal(&mut rng);

        cloud_ar = 0.9 * cloud_ar + 0.45 * standard_normal(&mut rng);
        let cloud_cover = (100.0 * sigmoid(cloud_ar + p.cloud_bias) + 8.0 * standard_normal(&mut rng))
            .clamp(0.0, 100.0);

        let relative_humidity = (p.humidity_base - 1.5 * (diurnal + temp_ar)
            + 0.25 * (cloud_cover - 50.0)
            + 4.0 * standard_normal(&mut rng))
        .clamp(2.0, 100.0);

        let precipitation = if cloud_cover > 75.0 && rng.random::<f64>() < p.rain_prob {
            let u: f64 = rng.random();
            -1.5 * libm::log(1.0 - u)
        } else {
            0.0
        };

        let shortwave_radiation = if (6.0..=18.0).contains(&hour) {
            let elevation = libm::sin(PI * (hour - 6.0) / 12.0).max(0.0);
            let seasonal = 1.0 + 0.15 * libm::sin(TAU * (day - 80.0) / 365.25);
            p.radiation_peak * elevation * seasonal * (1.0 - 0.6 * cloud_cover / 100.0)
        } else {
            0.0
        };

        wind_ar = 0.9 * wind_ar + 1.5 * standard_normal(&mut rng);
        let wind_speed = (p.wind_base + wind_ar + 3.0 * standard_normal(&mut rng)).abs();

        dir_ar = 0.95 * dir_ar + 0.3 * standard_normal(&mut rng);
        let wind_direction = wrap_degrees(dir_base + 60.0 * dir_ar + 25.0 * standard_normal(&mut rng));

        data.extend_from_slice(&[
            temperature,
            relative_humidity,
            precipitation,
            surface_pressure,
            cloud_cover,
            wind_speed,
            wind_direction,
            shortwave_radiation,
        ]);
    }

    let city = CityRecord {
        name: format!("synthetic-{}-{seed}", profile.as_str()),
        latitude: 0.0,
        longitude: 0.0,
        climate_zone: profile.as_str().into(),
        role: Role::Source,
    };
    // 2019-01-01T00:00:00Z
    let start = crate::calendar::days_from_civil(2019, 1, 1) * crate::calendar::SECONDS_PER_DAY;
    HourlySeries::new(
        city,
        start,
        Matrix::from_vec(n_hours, N_FEATURES, data)?,
        vec![false; n_hours * N_FEATURES],
    )
}

fn wrap_degrees(x: f64) -> f64 {
    let r = libm::fmod(x, 360.0);
    if r < 0.0 {
        r + 360.0
    } else {
        r
    }
}
