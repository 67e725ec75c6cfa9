//! Prepared-dataset container.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "GNDS" | version u32 | lookback u32 | features u32 | total windows u32
//! | segment count u32 | per segment: name (u16 + UTF-8), first window u32, count u32
//! | per segment: city count u32, cities (u16 name + start i64), origins (u32 city, u32 row) × count
//! | inputs f32 [N × lookback × features] | targets f32 [N × features]
//! | CRC-32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use wxnas_core::dataset::{CityTag, WindowOrigin, WindowedDataset};

use crate::binio::{write_atomic, Reader, Writer};
use crate::error::{AppError, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"GNDS";
pub const DATASET_VERSION: u32 = 1;

/// Named window sets sharing one window geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub lookback: usize,
    pub features: usize,
    pub segments: Vec<(String, WindowedDataset)>,
}

impl DatasetBundle {
    pub fn new(lookback: usize, features: usize) -> Self {
        Self { lookback, features, segments: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, ds: WindowedDataset) -> Result<()> {
        if ds.lookback != self.lookback || ds.features != self.features {
            return Err(AppError::Format("segment window shape differs from the bundle".into()));
        }
        self.segments.push((name.into(), ds));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&WindowedDataset> {
        self.segments.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn total_windows(&self) -> usize {
        self.segments.iter().map(|(_, d)| d.len()).sum()
    }
}

pub fn encode_dataset(bundle: &DatasetBundle) -> Result<Vec<u8>> {
    let n = bundle.total_windows();
    let w = bundle.lookback * bundle.features;
    let mut out = Writer::with_capacity(n * (w + bundle.features) * 4 + n * 8 + 1024);
    out.bytes(DATASET_MAGIC);
    out.u32(DATASET_VERSION);
    out.u32(bundle.lookback as u32);
    out.u32(bundle.features as u32);
    out.u32(n as u32);
    out.u32(bundle.segments.len() as u32);
    let mut offset = 0;
    for (name, ds) in &bundle.segments {
        out.string16(name)?;
        out.u32(offset as u32);
        out.u32(ds.len() as u32);
        offset += ds.len();
    }
    for (_, ds) in &bundle.segments {
        out.u32(ds.cities.len() as u32);
        for c in &ds.cities {
            out.string16(&c.name)?;
            out.i64(c.start_time);
        }
        for o in &ds.origins {
            out.u32(o.city);
            out.u32(o.row);
        }
    }
    for (_, ds) in &bundle.segments {
        out.f32s(&ds.x);
    }
    for (_, ds) in &bundle.segments {
        out.f32s(&ds.y);
    }
    Ok(out.finish_with_crc())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<DatasetBundle> {
    let mut r = Reader::with_crc(bytes)?;
    if r.take(4)? != DATASET_MAGIC {
        return Err(AppError::Format("not a dataset container (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(AppError::Version { found: version, expected: DATASET_VERSION });
    }
    let lookback = r.u32()? as usize;
    let features = r.u32()? as usize;
    let total = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut heads = Vec::with_capacity(count.min(16));
    let mut expected_offset = 0;
    for _ in 0..count {
        let name = r.string16()?;
        let offset = r.u32()? as usize;
        let len = r.u32()? as usize;
        if offset != expected_offset {
            return Err(AppError::Format(format!("segment `{name}` offset {offset}, expected {expected_offset}")));
        }
        expected_offset += len;
        heads.push((name, len));
    }
    if expected_offset != total {
        return Err(AppError::Format(format!("segments hold {expected_offset} windows, header says {total}")));
    }
    let mut segments = Vec::with_capacity(heads.len());
    for (name, len) in heads {
        let mut ds = WindowedDataset::empty(lookback, features);
        let cities = r.u32()? as usize;
        for _ in 0..cities {
            let city_name = r.string16()?;
            ds.cities.push(CityTag { name: city_name, start_time: r.i64()? });
        }
        for _ in 0..len {
            let o = WindowOrigin { city: r.u32()?, row: r.u32()? };
            if o.city as usize >= cities {
                return Err(AppError::Format(format!("segment `{name}` origin names unknown city {}", o.city)));
            }
            ds.origins.push(o);
        }
        segments.push((name, ds));
    }
    for (_, ds) in &mut segments {
        ds.x = r.f32s(ds.origins.len() * lookback * features)?;
    }
    for (_, ds) in &mut segments {
        ds.y = r.f32s(ds.origins.len() * features)?;
    }
    r.expect_end()?;
    Ok(DatasetBundle { lookback, features, segments })
}

pub fn save_dataset(bundle: &DatasetBundle, path: &Path) -> Result<()> {
    write_atomic(path, &encode_dataset(bundle)?)
}

pub fn load_dataset(path: &Path) -> Result<DatasetBundle> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_dataset(&bytes)
}
