//! Fixed-length four-slot architecture encoding and its repair rules.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::spec::{LayerKind, LayerSpec, ModelSpec, DROPOUT_TENTHS, MAX_DEPTH, UNIT_CHOICES};
use crate::rng::fnv1a;

pub const SLOTS: usize = MAX_DEPTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    None,
    Lstm,
    Gru,
    Cnn,
    Attn,
    Dense,
}

impl SlotKind {
    pub const ALL: [SlotKind; 6] =
        [SlotKind::None, SlotKind::Lstm, SlotKind::Gru, SlotKind::Cnn, SlotKind::Attn, SlotKind::Dense];

    pub fn layer(self) -> Option<LayerKind> {
        match self {
            SlotKind::None => None,
            SlotKind::Lstm => Some(LayerKind::Lstm),
            SlotKind::Gru => Some(LayerKind::Gru),
            SlotKind::Cnn => Some(LayerKind::Conv1D),
            SlotKind::Attn => Some(LayerKind::Attention),
            SlotKind::Dense => Some(LayerKind::Dense),
        }
    }

    fn from_layer(kind: LayerKind) -> Self {
        match kind {
            LayerKind::Lstm => SlotKind::Lstm,
            LayerKind::Gru => SlotKind::Gru,
            LayerKind::Conv1D => SlotKind::Cnn,
            LayerKind::Attention => SlotKind::Attn,
            LayerKind::Dense => SlotKind::Dense,
        }
    }

    fn is_temporal(self) -> bool {
        !matches!(self, SlotKind::None | SlotKind::Dense)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub kind: SlotKind,
    /// Index into [`UNIT_CHOICES`].
    pub units_code: u8,
    /// Index into [`DROPOUT_TENTHS`].
    pub dropout_code: u8,
}

impl Slot {
    pub const EMPTY: Slot = Slot { kind: SlotKind::None, units_code: 0, dropout_code: 0 };

    pub fn new(kind: SlotKind, units_code: u8, dropout_code: u8) -> Self {
        Self { kind, units_code, dropout_code }
    }

    pub fn units(&self) -> usize {
        UNIT_CHOICES[self.units_code as usize]
    }
}

/// Ordered so it can key a `BTreeMap`; compare only canonical genomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome {
    pub slots: [Slot; SLOTS],
}

pub(crate) fn random_kind<R: Rng + ?Sized>(rng: &mut R, allow_none: bool) -> SlotKind {
    let lo = usize::from(!allow_none);
    SlotKind::ALL[rng.random_range(lo..SlotKind::ALL.len())]
}

pub(crate) fn random_units<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    rng.random_range(0..UNIT_CHOICES.len()) as u8
}

pub(crate) fn random_dropout<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    rng.random_range(0..DROPOUT_TENTHS.len()) as u8
}

impl Genome {
    pub fn new(slots: [Slot; SLOTS]) -> Self {
        Self { slots }
    }

    /// Uniform over each field; the first slot is never empty. Repaired.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut slots = [Slot::EMPTY; SLOTS];
        for (i, s) in slots.iter_mut().enumerate() {
            *s = Slot::new(random_kind(rng, i > 0), random_units(rng), random_dropout(rng));
        }
        Self { slots }.repair()
    }

    /// Canonical form: empty slots at the tail with zeroed codes, dense slots
    /// after temporal ones (stable), and at least one layer.
    pub fn repair(&self) -> Self {
        let mut out: Vec<Slot> = Vec::with_capacity(SLOTS);
        out.extend(self.slots.iter().filter(|s| s.kind.is_temporal()));
        out.extend(self.slots.iter().filter(|s| s.kind == SlotKind::Dense));
        if out.is_empty() {
            out.push(Slot::new(SlotKind::Gru, 0, 0));
        }
        let mut slots = [Slot::EMPTY; SLOTS];
        for (dst, src) in slots.iter_mut().zip(out) {
            *dst = src;
        }
        Self { slots }
    }

    pub fn is_canonical(&self) -> bool {
        self.repair() == *self
    }

    pub fn depth(&self) -> usize {
        self.slots.iter().filter(|s| s.kind != SlotKind::None).count()
    }

    /// Decodes a canonical genome; non-canonical input is repaired first.
    pub fn decode(&self) -> ModelSpec {
        let g = self.repair();
        let layers = g
            .slots
            .iter()
            .filter_map(|s| {
                s.kind.layer().map(|k| LayerSpec::new(k, s.units()).with_dropout(DROPOUT_TENTHS[s.dropout_code as usize]))
            })
            .collect();
        ModelSpec { layers }
    }

    /// Inverse of [`Genome::decode`] for specs inside the search space.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        if !spec.in_search_space() {
            return Err(Error::InvalidSpec(alloc::format!("`{spec}` is outside the search space")));
        }
        let mut slots = [Slot::EMPTY; SLOTS];
        for (slot, l) in slots.iter_mut().zip(&spec.layers) {
            let u = UNIT_CHOICES.iter().position(|&u| u == l.units).unwrap_or(0);
            let d = DROPOUT_TENTHS.iter().position(|&d| d == l.dropout_tenths).unwrap_or(0);
            *slot = Slot::new(SlotKind::from_layer(l.kind), u as u8, d as u8);
        }
        Ok(Self { slots })
    }

    /// Stable 64-bit fingerprint of the canonical form.
    pub fn fingerprint(&self) -> u64 {
        let g = self.repair();
        let mut bytes = [0u8; SLOTS * 3];
        for (i, s) in g.slots.iter().enumerate() {
            bytes[i * 3] = s.kind as u8;
            bytes[i * 3 + 1] = s.units_code;
            bytes[i * 3 + 2] = s.dropout_code;
        }
        fnv1a(&bytes)
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.decode().fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::{count_params, Dims};
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn s(kind: SlotKind, units: usize) -> Slot {
        Slot::new(kind, UNIT_CHOICES.iter().position(|&u| u == units).unwrap() as u8, 0)
    }

    #[test]
    fn repair_compacts_and_reorders() {
        let e = Slot::EMPTY;
        let g = Genome::new([e, s(SlotKind::Gru, 64), e, s(SlotKind::Dense, 32)]).repair();
        assert_eq!(g.slots, [s(SlotKind::Gru, 64), s(SlotKind::Dense, 32), e, e]);
        let g = Genome::new([s(SlotKind::Dense, 32), s(SlotKind::Cnn, 128), e, e]).repair();
        assert_eq!(g.slots, [s(SlotKind::Cnn, 128), s(SlotKind::Dense, 32), e, e]);
        let g = Genome::new([Slot::new(SlotKind::None, 3, 4); SLOTS]).repair();
        assert_eq!(g.slots[0], Slot::new(SlotKind::Gru, 0, 0));
        assert_eq!(g.depth(), 1);
    }

    #[test]
    fn decode_representatives() {
        let e = Slot::EMPTY;
        let a = Genome::new([s(SlotKind::Gru, 128), s(SlotKind::Gru, 128), e, e]);
        assert_eq!(count_params(&a.decode(), Dims::default()), 153_096);
        let c = Genome::new([s(SlotKind::Cnn, 32), e, e, e]);
        assert_eq!(count_params(&c.decode(), Dims::default()), 1_064);
        assert_eq!(Genome::from_spec(&a.decode()).unwrap(), a);
    }

    #[test]
    fn random_genomes_cover_all_kinds() {
        let mut rng = seeded(3);
        let mut seen = [false; 6];
        for _ in 0..10_000 {
            let g = Genome::random(&mut rng);
            assert_ne!(g.slots[0].kind, SlotKind::None);
            assert!(g.is_canonical());
            for slot in g.slots {
                seen[slot.kind as usize] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    fn arb_slot() -> impl Strategy<Value = Slot> {
        (0usize..6, 0u8..4, 0u8..6).prop_map(|(k, u, d)| Slot::new(SlotKind::ALL[k], u, d))
    }

    proptest! {
        #[test]
        fn repair_is_idempotent_and_canonical(raw in proptest::array::uniform4(arb_slot())) {
            let g = Genome::new(raw).repair();
            prop_assert_eq!(g.repair(), g);
            let spec = g.decode();
            prop_assert!(spec.validate().is_ok());
            prop_assert_eq!(spec.depth(), g.depth());
            let first_none = g.slots.iter().position(|s| s.kind == SlotKind::None).unwrap_or(SLOTS);
            prop_assert!(g.slots[first_none..].iter().all(|s| *s == Slot::EMPTY));
        }
    }
}
