//! Patch bank accumulating per-epoch matching distances into the
//! uncertainty surrogate.
//!
//! Scenes are cut into a fixed set of patches once; the bank keys an
//! accumulator per patch. Every training epoch the distance between that
//! epoch's prediction and the ground truth is added, and the surrogate is
//! the running mean:
//!
//! ```text
//! asm(key) = sum of recorded distances / number of epochs
//! ```
//!
//! Random crops cannot be accumulated, which is why the bank only accepts
//! registered fixed-grid keys. The last recorded distance is kept alongside
//! the sum so a no-averaging variant can rank by the latest epoch alone.
//!
//! Before feeding the ranking loss, a batch of surrogate values is min-max
//! normalized to `[0, 1]`; a batch of all-equal values normalizes to all
//! zeros (no rankable pairs).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::PointSet;
use crate::matching::{spatial_matching_distance, MatchingError};

/// Errors from bank operations.
#[derive(Debug, Clone, PartialEq)]
pub enum AsmError {
    /// The key was never registered in the bank.
    MissingPatch(PatchKey),
    /// The key has no recorded epochs yet.
    UninitializedSurrogate(PatchKey),
    /// A distance computation failed.
    Matching(MatchingError),
    /// An argument was outside its domain.
    InvalidArgument(&'static str),
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsmError::MissingPatch(key) => {
                write!(f, "patch {}#{} is not registered", key.scene_id, key.patch_index)
            }
            AsmError::UninitializedSurrogate(key) => write!(
                f,
                "patch {}#{} has no recorded epochs",
                key.scene_id, key.patch_index
            ),
            AsmError::Matching(e) => write!(f, "distance computation failed: {e}"),
            AsmError::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
        }
    }
}

impl core::error::Error for AsmError {}

impl From<MatchingError> for AsmError {
    fn from(e: MatchingError) -> Self {
        AsmError::Matching(e)
    }
}

/// Identifies one cached patch: a scene id plus the row-major index into
/// that scene's patch grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatchKey {
    pub scene_id: String,
    pub patch_index: usize,
}

impl PatchKey {
    pub fn new(scene_id: impl Into<String>, patch_index: usize) -> Self {
        PatchKey {
            scene_id: scene_id.into(),
            patch_index,
        }
    }
}

impl fmt::Display for PatchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.scene_id, self.patch_index)
    }
}

/// Running accumulator state for one patch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AsmEntry {
    /// Sum of recorded distances, pixels.
    pub sum_dist: f64,
    /// Number of recorded epochs.
    pub epoch_count: u64,
    /// The most recently recorded distance.
    pub last_dist: f64,
}

impl AsmEntry {
    /// The accumulated surrogate: mean recorded distance, or `None` before
    /// the first epoch.
    pub fn asm(&self) -> Option<f64> {
        if self.epoch_count == 0 {
            None
        } else {
            Some(self.sum_dist / self.epoch_count as f64)
        }
    }
}

/// A batch of surrogate values min-max normalized to `[0, 1]`.
///
/// If the raw values are not all equal, the minimum maps to 0 and the
/// maximum to 1; a degenerate batch maps to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBatch {
    pub keys: Vec<PatchKey>,
    pub a_values: Vec<f64>,
}

/// The patch bank: per-key accumulators sharing one penalty constant
/// (one patch size per bank).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBank", into = "RawBank")]
pub struct AsmBank {
    penalty_c: f64,
    entries: BTreeMap<PatchKey, AsmEntry>,
}

/// Serialized form: one record per key, sorted by key.
#[derive(Serialize, Deserialize)]
struct RawBank {
    penalty_c: f64,
    entries: Vec<RawEntry>,
}

#[derive(Serialize, Deserialize)]
struct RawEntry {
    scene_id: String,
    patch_index: usize,
    sum_dist: f64,
    epoch_count: u64,
    last_dist: f64,
}

impl TryFrom<RawBank> for AsmBank {
    type Error = AsmError;
    fn try_from(raw: RawBank) -> Result<Self, Self::Error> {
        let mut bank = AsmBank::new(raw.penalty_c)?;
        for e in raw.entries {
            if !e.sum_dist.is_finite() || e.sum_dist < 0.0 || !e.last_dist.is_finite() {
                return Err(AsmError::InvalidArgument("serialized distance"));
            }
            bank.entries.insert(
                PatchKey::new(e.scene_id, e.patch_index),
                AsmEntry {
                    sum_dist: e.sum_dist,
                    epoch_count: e.epoch_count,
                    last_dist: e.last_dist,
                },
            );
        }
        Ok(bank)
    }
}

impl From<AsmBank> for RawBank {
    fn from(bank: AsmBank) -> Self {
        RawBank {
            penalty_c: bank.penalty_c,
            entries: bank
                .entries
                .into_iter()
                .map(|(k, e)| RawEntry {
                    scene_id: k.scene_id,
                    patch_index: k.patch_index,
                    sum_dist: e.sum_dist,
                    epoch_count: e.epoch_count,
                    last_dist: e.last_dist,
                })
                .collect(),
        }
    }
}

impl AsmBank {
    pub fn new(penalty_c: f64) -> Result<Self, AsmError> {
        if !penalty_c.is_finite() || penalty_c <= 0.0 {
            return Err(AsmError::InvalidArgument("penalty_c"));
        }
        Ok(AsmBank {
            penalty_c,
            entries: BTreeMap::new(),
        })
    }

    pub fn penalty_c(&self) -> f64 {
        self.penalty_c
    }

    /// Registers a patch key with an empty accumulator; idempotent.
    pub fn register(&mut self, key: PatchKey) {
        self.entries.entry(key).or_default();
    }

    /// Registers every patch of a scene's grid.
    pub fn register_scene(&mut self, scene_id: &str, patch_count: usize) {
        for index in 0..patch_count {
            self.register(PatchKey::new(scene_id, index));
        }
    }

    pub fn contains(&self, key: &PatchKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn entry(&self, key: &PatchKey) -> Option<&AsmEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keys in sorted order.
    pub fn keys(&self) -> impl Iterator<Item = &PatchKey> {
        self.entries.keys()
    }

    /// The surrogate value for a key, if any epoch was recorded.
    pub fn asm(&self, key: &PatchKey) -> Option<f64> {
        self.entries.get(key).and_then(AsmEntry::asm)
    }

    /// The most recent recorded distance for a key.
    pub fn last_dist(&self, key: &PatchKey) -> Option<f64> {
        let e = self.entries.get(key)?;
        if e.epoch_count == 0 {
            None
        } else {
            Some(e.last_dist)
        }
    }

    /// Records one epoch for a patch: computes the spatial matching
    /// distance between the prediction and the ground truth (both cropped
    /// to the same patch frame) with the bank's penalty constant, adds it
    /// to the accumulator, and returns the updated entry.
    pub fn record_epoch(
        &mut self,
        key: &PatchKey,
        pred: &PointSet,
        gt: &PointSet,
    ) -> Result<AsmEntry, AsmError> {
        if !self.entries.contains_key(key) {
            return Err(AsmError::MissingPatch(key.clone()));
        }
        let result = spatial_matching_distance(pred, gt, self.penalty_c)?;
        self.record_raw(key, result.distance)
    }

    /// Records a pre-computed distance. This is the accumulation hook the
    /// ablation surrogates use (counting difference, Wasserstein,
    /// Hungarian-drop) in place of the matching distance.
    pub fn record_raw(&mut self, key: &PatchKey, distance: f64) -> Result<AsmEntry, AsmError> {
        if !distance.is_finite() || distance < 0.0 {
            return Err(AsmError::InvalidArgument("distance"));
        }
        let entry = self
            .entries
            .get_mut(key)
            .ok_or_else(|| AsmError::MissingPatch(key.clone()))?;
        entry.sum_dist += distance;
        entry.epoch_count += 1;
        entry.last_dist = distance;
        Ok(*entry)
    }

    /// Min-max normalizes the surrogate values of the given keys.
    ///
    /// Every key must be registered and have at least one recorded epoch.
    /// A degenerate batch (all values equal) normalizes to all zeros.
    pub fn normalize_batch(&self, keys: &[PatchKey]) -> Result<NormalizedBatch, AsmError> {
        let mut raw = Vec::with_capacity(keys.len());
        for key in keys {
            let entry = self
                .entries
                .get(key)
                .ok_or_else(|| AsmError::MissingPatch(key.clone()))?;
            let value = entry
                .asm()
                .ok_or_else(|| AsmError::UninitializedSurrogate(key.clone()))?;
            raw.push(value);
        }
        Ok(NormalizedBatch {
            keys: keys.to_vec(),
            a_values: min_max_normalize(&raw),
        })
    }

    /// Bank-global normalization over every key with at least one recorded
    /// epoch, in sorted key order.
    pub fn normalize_all(&self) -> NormalizedBatch {
        let mut keys = Vec::new();
        let mut raw = Vec::new();
        for (key, entry) in &self.entries {
            if let Some(value) = entry.asm() {
                keys.push(key.clone());
                raw.push(value);
            }
        }
        NormalizedBatch {
            keys,
            a_values: min_max_normalize(&raw),
        }
    }
}

/// Min-max normalization with the all-equal batch mapping to zeros.
pub(crate) fn min_max_normalize(raw: &[f64]) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in raw {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if raw.is_empty() || lo == hi {
        return alloc::vec![0.0; raw.len()];
    }
    let span = hi - lo;
    raw.iter().map(|&v| (v - lo) / span).collect()
}

/// Reads a normalized surrogate as a confidence: `1 - a`. Used when the
/// scorer is trained as a confidence (high = reliable) rather than an
/// uncertainty.
pub fn confidence_view(a: f64) -> Result<f64, AsmError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(AsmError::InvalidArgument("normalized value outside [0, 1]"));
    }
    Ok(1.0 - a)
}
