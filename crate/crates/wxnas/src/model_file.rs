//! Trained-model artifact.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "GNAS" | version u32 | lookback u32 | features u32
//! | descriptor (u32 length + UTF-8) | metadata (u32 length + JSON)
//! | tensor count u32 | per tensor: name (u16 length + UTF-8), rank u8,
//!   dims u32 × rank, f32 payload
//! | CRC-32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wxnas_core::nn::{Dims, ModelSpec, ParamSet, Tensor, TrainMeta, TrainedModel};

use crate::binio::{Reader, Writer};
use crate::error::{AppError, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"GNAS";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MetaJson {
    epochs_run: usize,
    best_epoch: usize,
    /// `null` when no finite score exists (an untrained model).
    best_val_rmse: Option<f64>,
    seed: u64,
    train_loss: Vec<f64>,
    val_rmse: Vec<f64>,
    scaler_ids: Vec<String>,
}

pub fn encode_model(model: &TrainedModel) -> Result<Vec<u8>> {
    let m = &model.meta;
    let meta = MetaJson {
        epochs_run: m.epochs_run,
        best_epoch: m.best_epoch,
        best_val_rmse: m.best_val_rmse.is_finite().then_some(m.best_val_rmse),
        seed: m.seed,
        train_loss: m.train_loss.clone(),
        val_rmse: m.val_rmse.clone(),
        scaler_ids: model.scaler_ids.clone(),
    };
    let mut w = Writer::with_capacity(model.params.scalar_count() * 4 + 1024);
    w.bytes(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.u32(model.dims.lookback as u32);
    w.u32(model.dims.features as u32);
    w.string32(&model.spec.descriptor());
    w.string32(&serde_json::to_string(&meta)?);
    w.u32(model.params.tensors.len() as u32);
    for t in &model.params.tensors {
        w.string16(&t.name)?;
        w.u8(u8::try_from(t.shape.len()).map_err(|_| AppError::Format("tensor rank above 255".into()))?);
        for &d in &t.shape {
            w.u32(d as u32);
        }
        w.f32s(&t.data);
    }
    Ok(w.finish_with_crc())
}

pub fn decode_model(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader::with_crc(bytes)?;
    if r.take(4)? != MODEL_MAGIC {
        return Err(AppError::Format("not a model artifact (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(AppError::Version { found: version, expected: MODEL_VERSION });
    }
    let dims = Dims { lookback: r.u32()? as usize, features: r.u32()? as usize };
    let spec: ModelSpec = r.string32()?.parse()?;
    let meta: MetaJson = serde_json::from_str(&r.string32()?)?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name = r.string16()?;
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| {
            AppError::Format(format!("tensor `{name}` shape overflows"))
        })?;
        let data = r.f32s(n)?;
        tensors.push(Tensor { name, shape, data });
    }
    r.expect_end()?;
    let mut model = TrainedModel::new(spec, dims, ParamSet::new(tensors))?;
    model.meta = TrainMeta {
        epochs_run: meta.epochs_run,
        best_epoch: meta.best_epoch,
        best_val_rmse: meta.best_val_rmse.unwrap_or(f64::INFINITY),
        seed: meta.seed,
        train_loss: meta.train_loss,
        val_rmse: meta.val_rmse,
    };
    model.scaler_ids = meta.scaler_ids;
    Ok(model)
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    crate::binio::write_atomic(path, &encode_model(model)?)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_model(&bytes)
}

/// On-disk size of an artifact in bytes.
pub fn model_size(path: &Path) -> Result<u64> {
    if path.as_os_str().is_empty() {
        return Err(AppError::Config("empty model path".into()));
    }
    let meta = fs::metadata(path).map_err(|e| AppError::io(path, e))?;
    if !meta.is_file() {
        return Err(AppError::Config(format!("{} is not a file", path.display())));
    }
    Ok(meta.len())
}
