//! Descriptor algebra: normalization, similarity, GeM pooling, PCA whitening,
//! spectrum diagnostics, and per-location match heatmaps.
//!
//! All types are immutable after construction and every operation is a pure
//! function, so the whole module is safe for concurrent read-side use.

mod gem;
mod heatmap;
pub(crate) mod set;
mod spectrum;
mod whitening;

pub use gem::{gem_pool, ActivationGrid, GemPower};
pub use heatmap::match_heatmap;
pub use set::{cosine_similarity, l2_normalize, DescriptorSet, Matrix, Vector};
pub use spectrum::{principal_spectrum, SpectrumReport};
pub use whitening::{fit_whitening, whitening_dimension_sweep, WhiteningTransform};
