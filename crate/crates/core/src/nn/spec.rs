//! Architecture descriptions and exact parameter accounting.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::schema::{LOOKBACK, N_FEATURES};

/// Width choices available to the search.
pub const UNIT_CHOICES: [usize; 4] = [32, 64, 128, 256];
/// Dropout choices available to the search, in tenths.
pub const DROPOUT_TENTHS: [u8; 6] = [0, 1, 2, 3, 4, 5];
pub const CONV_KERNEL: usize = 3;
pub const ATTENTION_HEADS: usize = 4;
pub const MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    Dense,
    Conv1D,
    Gru,
    Lstm,
    Attention,
}

impl LayerKind {
    pub fn is_temporal(self) -> bool {
        !matches!(self, LayerKind::Dense)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, LayerKind::Gru | LayerKind::Lstm)
    }

    pub fn token(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::Conv1D => "cnn",
            LayerKind::Gru => "gru",
            LayerKind::Lstm => "lstm",
            LayerKind::Attention => "attn",
        }
    }

    fn from_token(s: &str) -> Option<Self> {
        [LayerKind::Dense, LayerKind::Conv1D, LayerKind::Gru, LayerKind::Lstm, LayerKind::Attention]
            .into_iter()
            .find(|k| k.token() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub units: usize,
    /// Dropout rate in tenths (0..=9).
    pub dropout_tenths: u8,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, units: usize) -> Self {
        Self { kind, units, dropout_tenths: 0 }
    }

    pub fn with_dropout(mut self, tenths: u8) -> Self {
        self.dropout_tenths = tenths;
        self
    }

    pub fn dropout(&self) -> f64 {
        f64::from(self.dropout_tenths) / 10.0
    }

    pub fn in_search_space(&self) -> bool {
        UNIT_CHOICES.contains(&self.units) && DROPOUT_TENTHS.contains(&self.dropout_tenths)
    }
}

/// Input geometry: windows of `lookback` hours × `features` channels, and the
/// head predicts `features` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub lookback: usize,
    pub features: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self { lookback: LOOKBACK, features: N_FEATURES }
    }
}

/// How the temporal stack's sequence output becomes a vector for the dense
/// layers and head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// No temporal layers: the raw window is flattened.
    Flatten,
    /// Recurrent final temporal layer: its last hidden state.
    LastStep,
    /// Conv1D or attention final temporal layer: mean over time.
    MeanOverTime,
}

/// 1–4 layers (temporal first, then dense) plus an implicit linear head.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.layers.len() > MAX_DEPTH {
            return Err(Error::InvalidSpec(format!(
                "depth {} outside 1..={MAX_DEPTH}",
                self.layers.len()
            )));
        }
        let mut seen_dense = false;
        for l in &self.layers {
            if l.units == 0 {
                return Err(Error::InvalidSpec("layer with zero units".into()));
            }
            if l.dropout_tenths > 9 {
                return Err(Error::InvalidSpec("dropout must be below 1.0".into()));
            }
            if l.kind == LayerKind::Attention && l.units % ATTENTION_HEADS != 0 {
                return Err(Error::InvalidSpec(format!(
                    "attention width {} not divisible by {ATTENTION_HEADS} heads",
                    l.units
                )));
            }
            if l.kind.is_temporal() && seen_dense {
                return Err(Error::InvalidSpec("temporal layer after a dense layer".into()));
            }
            seen_dense |= !l.kind.is_temporal();
        }
        Ok(())
    }

    pub fn in_search_space(&self) -> bool {
        self.validate().is_ok() && self.layers.iter().all(LayerSpec::in_search_space)
    }

    pub fn temporal_count(&self) -> usize {
        self.layers.iter().take_while(|l| l.kind.is_temporal()).count()
    }

    pub fn reduction(&self) -> Reduction {
        match self.layers[..self.temporal_count()].last() {
            None => Reduction::Flatten,
            Some(l) if l.kind.is_recurrent() => Reduction::LastStep,
            Some(_) => Reduction::MeanOverTime,
        }
    }

    /// Width of the vector entering the head.
    pub fn head_width(&self, dims: Dims) -> usize {
        match self.layers.last() {
            Some(l) => l.units,
            None => dims.lookback * dims.features,
        }
    }
}

/// Trainable-parameter count of a single layer with `input` channels.
pub fn layer_params(kind: LayerKind, input: usize, units: usize) -> usize {
    let (i, u) = (input, units);
    match kind {
        LayerKind::Dense => i * u + u,
        LayerKind::Conv1D => i * CONV_KERNEL * u + u,
        // Two bias vectors per gate block.
        LayerKind::Gru => 3 * u * (i + u + 2),
        LayerKind::Lstm => 4 * u * (i + u + 2),
        LayerKind::Attention => (i * u + u) + 4 * (u * u + u),
    }
}

/// Exact trainable-parameter count, including the linear output head.
pub fn count_params(spec: &ModelSpec, dims: Dims) -> usize {
    let mut width = dims.features;
    let mut total = 0;
    for (idx, l) in spec.layers.iter().enumerate() {
        let input = if !l.kind.is_temporal() && idx == 0 { dims.lookback * dims.features } else { width };
        total += layer_params(l.kind, input, l.units);
        width = l.units;
    }
    total + spec.head_width(dims) * dims.features + dims.features
}

impl fmt::Display for ModelSpec {
    /// Canonical descriptor, e.g. `gru128-gru128` or `cnn64@0.2-dense32`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}{}", l.kind.token(), l.units)?;
            if l.dropout_tenths > 0 {
                write!(f, "@0.{}", l.dropout_tenths)?;
            }
        }
        Ok(())
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Parses canonical descriptors plus a repeat shorthand, so the aliases
    /// `gru128x2`, `cnn128`, `cnn32` and `lstm64x2` are all valid input.
    fn from_str(s: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for token in s.trim().split('-') {
            let bad = || Error::InvalidSpec(format!("cannot parse layer `{token}` in `{s}`"));
            let (body, dropout_tenths) = match token.split_once('@') {
                Some((body, d)) => {
                    let rate: f64 = d.parse().map_err(|_| bad())?;
                    let tenths = libm::round(rate * 10.0);
                    if !(0.0..=9.0).contains(&tenths) || libm::fabs(tenths / 10.0 - rate) > 1e-9 {
                        return Err(bad());
                    }
                    (body, tenths as u8)
                }
                None => (token, 0),
            };
            let (body, repeat) = match body.rsplit_once('x') {
                Some((b, r)) if !r.is_empty() && r.bytes().all(|c| c.is_ascii_digit()) => {
                    (b, r.parse::<usize>().map_err(|_| bad())?)
                }
                _ => (body, 1),
            };
            let split = body.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
            let kind = LayerKind::from_token(&body[..split]).ok_or_else(bad)?;
            let units: usize = body[split..].parse().map_err(|_| bad())?;
            for _ in 0..repeat {
                layers.push(LayerSpec { kind, units, dropout_tenths });
            }
        }
        ModelSpec::new(layers)
    }
}

impl ModelSpec {
    pub fn descriptor(&self) -> String {
        self.to_string()
    }
}
