//! The fixed eight-column feature layout shared by ingest, training and inference.

/// Number of input (and output) features per hour.
pub const N_FEATURES: usize = 8;

/// Look-back window length in hours.
pub const LOOKBACK: usize = 24;

/// Bumped whenever the column order or units change; embedded in cache headers.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feature {
    Temperature2m,
    RelativeHumidity2m,
    Precipitation,
    SurfacePressure,
    CloudCover,
    WindSpeed10m,
    WindDirection10m,
    ShortwaveRadiation,
}

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::Temperature2m,
        Feature::RelativeHumidity2m,
        Feature::Precipitation,
        Feature::SurfacePressure,
        Feature::CloudCover,
        Feature::WindSpeed10m,
        Feature::WindDirection10m,
        Feature::ShortwaveRadiation,
    ];

    /// Open-Meteo variable name, also used as the column name everywhere.
    pub const fn name(self) -> &'static str {
        match self {
            Feature::Temperature2m => "temperature_2m",
            Feature::RelativeHumidity2m => "relative_humidity_2m",
            Feature::Precipitation => "precipitation",
            Feature::SurfacePressure => "surface_pressure",
            Feature::CloudCover => "cloud_cover",
            Feature::WindSpeed10m => "wind_speed_10m",
            Feature::WindDirection10m => "wind_direction_10m",
            Feature::ShortwaveRadiation => "shortwave_radiation",
        }
    }

    pub const fn unit(self) -> &'static str {
        match self {
            Feature::Temperature2m => "°C",
            Feature::RelativeHumidity2m => "%",
            Feature::Precipitation => "mm",
            Feature::SurfacePressure => "hPa",
            Feature::CloudCover => "%",
            Feature::WindSpeed10m => "km/h",
            Feature::WindDirection10m => "°",
            Feature::ShortwaveRadiation => "W/m²",
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_canonical() {
        assert_eq!(Feature::ALL.len(), N_FEATURES);
        for (i, f) in Feature::ALL.iter().enumerate() {
            assert_eq!(f.index(), i);
            assert_eq!(Feature::from_name(f.name()), Some(*f));
        }
        assert_eq!(Feature::ALL[3].name(), "surface_pressure");
    }
}
