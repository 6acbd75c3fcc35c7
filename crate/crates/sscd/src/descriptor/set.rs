//! Descriptor sets and basic vector operations.

use ndarray::{Array2, ArrayView1};
use std::collections::HashSet;

use crate::error::{Error, Result};

/// Real vector, 64-bit throughout the in-memory pipeline.
pub type Vector = ndarray::Array1<f64>;
/// Row-major matrix of descriptors (count x dim).
pub type Matrix = ndarray::Array2<f64>;

/// Tolerance for the `normalized` invariant on in-memory sets.
pub(crate) const NORM_TOL: f64 = 1e-6;
/// Looser tolerance for sets loaded from 32-bit files.
pub(crate) const NORM_TOL_F32: f64 = 1e-5;

/// An id-labeled matrix of fixed-dimension descriptors.
///
/// Ids are unique; when the `normalized` flag is set every row has unit L2
/// norm. This is the currency passed between pooling, whitening, score
/// normalization and retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    ids: Vec<String>,
    data: Matrix,
    normalized: bool,
}

impl DescriptorSet {
    /// Build a set of raw (not necessarily normalized) descriptors.
    pub fn new(ids: Vec<String>, data: Matrix) -> Result<Self> {
        Self::with_flag(ids, data, false, NORM_TOL)
    }

    /// Build a set whose rows are already unit-normalized; each row's norm is
    /// verified against the invariant tolerance.
    pub fn new_normalized(ids: Vec<String>, data: Matrix) -> Result<Self> {
        Self::with_flag(ids, data, true, NORM_TOL)
    }

    pub(crate) fn with_flag(
        ids: Vec<String>,
        data: Matrix,
        normalized: bool,
        tol: f64,
    ) -> Result<Self> {
        if ids.len() != data.nrows() {
            return Err(Error::LengthMismatch {
                what: "ids",
                expected: data.nrows(),
                actual: ids.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId { id: id.clone() });
            }
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "descriptor data".to_string(),
            });
        }
        if normalized {
            for (row, r) in data.rows().into_iter().enumerate() {
                let norm = r.dot(&r).sqrt();
                if (norm - 1.0).abs() > tol {
                    return Err(Error::NotNormalized { row, norm });
                }
            }
        }
        Ok(Self {
            ids,
            data,
            normalized,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Return a copy with every row L2-normalized.
    ///
    /// Errors on any zero row, never producing silent NaNs.
    pub fn l2_normalized(&self) -> Result<Self> {
        let mut data = self.data.clone();
        for mut row in data.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::ZeroVector);
            }
            row.mapv_inplace(|v| v / norm);
        }
        Ok(Self {
            ids: self.ids.clone(),
            data,
            normalized: true,
        })
    }

    /// Consume the set, returning its parts.
    pub fn into_parts(self) -> (Vec<String>, Matrix) {
        (self.ids, self.data)
    }

    /// Stack two sets with the same dimension (ids must stay unique).
    pub fn concat(a: &Self, b: &Self) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                actual: b.dim(),
            });
        }
        let mut ids = a.ids.clone();
        ids.extend(b.ids.iter().cloned());
        let mut data = Array2::zeros((a.count() + b.count(), a.dim()));
        data.slice_mut(ndarray::s![..a.count(), ..]).assign(&a.data);
        data.slice_mut(ndarray::s![a.count().., ..]).assign(&b.data);
        let normalized = a.normalized && b.normalized;
        Self::with_flag(ids, data, normalized, NORM_TOL)
    }

    /// Select a subset of rows (by index), preserving order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(indices.len());
        let mut data = Array2::zeros((indices.len(), self.dim()));
        for (out, &i) in indices.iter().enumerate() {
            if i >= self.count() {
                return Err(Error::InvalidParameter {
                    name: "indices",
                    reason: format!("row {i} out of range (count {})", self.count()),
                });
            }
            ids.push(self.ids[i].clone());
            data.row_mut(out).assign(&self.data.row(i));
        }
        Self::with_flag(ids, data, self.normalized, NORM_TOL)
    }
}

/// Scale a vector to unit L2 norm, preserving direction.
pub fn l2_normalize(v: &Vector) -> Result<Vector> {
    let norm = v.dot(v).sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite {
            context: "l2_normalize input".to_string(),
        });
    }
    if !(norm > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(v / norm)
}

/// Cosine similarity of two unit vectors: their dot product, clamped to
/// [-1, 1] against rounding.
pub fn cosine_similarity(a: &Vector, b: &Vector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    for (name, v) in [("a", a), ("b", b)] {
        let norm = v.dot(v).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter {
                name: "vector",
                reason: format!("input `{name}` is not unit-normalized (norm {norm})"),
            });
        }
    }
    Ok(a.dot(b).clamp(-1.0, 1.0))
}
