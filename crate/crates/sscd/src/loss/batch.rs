//! Match structure of a training batch.

use crate::error::{Error, Result};

/// How two inputs were blended into one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MixMode {
    /// Convex combination of coordinates.
    Mixup,
    /// Contiguous coordinate block replacement.
    Cutmix,
}

/// Mixing metadata for one view: which batch sources contributed and with
/// what weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixWeight {
    pub source_a: usize,
    pub source_b: usize,
    pub gamma: f64,
    pub mode: MixMode,
}

/// Positive-match structure over the views of a batch.
///
/// `match_sets[i]` is P_i, the views derived (fully or partially) from the
/// same sources as view i; the self-inclusive set is P_i + {i}. Matching is
/// symmetric and irreflexive. With plain repeated augmentation every view has
/// exactly one match: |P_i| = 1 with pairs (i, i+N) and (i+N, i). Mixed views
/// may match several.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStructure {
    match_sets: Vec<Vec<usize>>,
    mix_weights: Option<Vec<Option<MixWeight>>>,
}

impl BatchStructure {
    pub fn new(match_sets: Vec<Vec<usize>>) -> Result<Self> {
        let size = match_sets.len();
        let mut sorted = match_sets;
        for (i, set) in sorted.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.iter().any(|&j| j >= size) {
                return Err(Error::InvalidBatch(format!(
                    "view {i} matches an out-of-range index (batch size {size})"
                )));
            }
            if set.binary_search(&i).is_ok() {
                return Err(Error::InvalidBatch(format!("view {i} matches itself")));
            }
        }
        for i in 0..size {
            for &j in &sorted[i] {
                if sorted[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidBatch(format!(
                        "matching is not symmetric: {j} in P_{i} but {i} not in P_{j}"
                    )));
                }
            }
        }
        Ok(Self {
            match_sets: sorted,
            mix_weights: None,
        })
    }

    /// The standard repeated-augmentation structure for n source images:
    /// 2n views with pairs (i, i+n) and (i+n, i).
    pub fn repeated_pairs(n: usize) -> Self {
        let mut match_sets = vec![Vec::new(); 2 * n];
        for i in 0..n {
            match_sets[i].push(i + n);
            match_sets[i + n].push(i);
        }
        Self {
            match_sets,
            mix_weights: None,
        }
    }

    /// Attach per-view mixing metadata (one entry per view).
    pub fn with_mix_weights(mut self, mix: Vec<Option<MixWeight>>) -> Result<Self> {
        if mix.len() != self.size() {
            return Err(Error::LengthMismatch {
                what: "mix_weights",
                expected: self.size(),
                actual: mix.len(),
            });
        }
        self.mix_weights = Some(mix);
        Ok(self)
    }

    /// Number of views in the batch.
    pub fn size(&self) -> usize {
        self.match_sets.len()
    }

    /// P_i, sorted ascending.
    pub fn matches(&self, i: usize) -> &[usize] {
        &self.match_sets[i]
    }

    /// Whether j is in the self-inclusive set P_i + {i}.
    pub fn in_self_set(&self, i: usize, j: usize) -> bool {
        i == j || self.match_sets[i].binary_search(&j).is_ok()
    }

    /// True when every view has exactly one positive (no mixing).
    pub fn single_positive(&self) -> bool {
        self.match_sets.iter().all(|s| s.len() == 1)
    }

    pub fn mix_weights(&self) -> Option<&[Option<MixWeight>]> {
        self.mix_weights.as_deref()
    }

    /// Total number of ordered positive pairs.
    pub fn pair_count(&self) -> usize {
        self.match_sets.iter().map(|s| s.len()).sum()
    }
}
