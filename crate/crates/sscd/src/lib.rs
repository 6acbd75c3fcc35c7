//! Copy-detection descriptor toolkit.
//!
//! The pieces of a descriptor-based copy-detection pipeline, built to be
//! verified end to end at desk scale:
//!
//! - [`descriptor`]: normalization, cosine similarity, GeM pooling, PCA
//!   whitening, principal-value spectrum / effective-rank diagnostics, and
//!   per-location match heatmaps.
//! - [`loss`]: InfoNCE, the KoLeo differential-entropy regularizer, the
//!   mix-aware InfoNCE used with mixup/cutmix batches, and their weighted
//!   combination, each with analytic gradients.
//! - [`toy`]: a synthetic copy-detection benchmark (sources are vectors,
//!   augmentation is noise/dropout/scaling) that trains a small encoder
//!   with the combined loss and tracks collapse and separation phenomena.
//! - [`scorenorm`]: background-set similarity normalization, integrated-bias
//!   descriptor augmentation, and the MIPS-to-L2 search reduction.
//! - [`eval`]: exact brute-force k-NN search and retrieval metrics (µAP,
//!   mAP, recall@1, MRR, PR curves, distance histograms).
//! - [`io`]: binary descriptor files, CSV candidate/ground-truth formats,
//!   and the JSON run configuration.
//! - [`cmd`]: the `sscd` command-line surface over all of the above.
//!
//! See the crate `examples/` directory for one runnable walkthrough per
//! capability.

pub mod cmd;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod io;
pub mod loss;
pub mod scorenorm;
pub mod toy;

pub use error::{Error, Result};
