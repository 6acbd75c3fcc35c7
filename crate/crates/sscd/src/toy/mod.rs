//! Synthetic copy-detection benchmark.
//!
//! Sources are random vectors standing in for images; "augmentation" is
//! scaling + noise + coordinate dropout, with optional mixup/cutmix blending
//! of two sources. A small encoder is trained with the combined contrastive
//! + entropy objective, and the embedding-geometry phenomena of interest
//! (dimensional collapse, positive/negative separation, retrieval quality)
//! are measured on a held-out probe split.
//!
//! The augmentations are deliberately a vector-space analog of image
//! transformations: the geometry claims under test only require that views
//! of a source are perturbations of it. Nothing here attempts image-level
//! accuracy numbers.

mod augment;
mod batch_builder;
mod encoder;
mod gradcheck;
mod source;
mod train;

pub use augment::{augment, mix_views, AugmentParams};
pub use batch_builder::{build_batch, BatchViews};
pub use encoder::{Encoder, EncoderKind, ForwardCache, Gradients};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use source::{generate_sources, ToySource};
pub use train::{
    percentile, probe_descriptors, train, EpochStats, ProbeReport, Schedule, TrainConfig,
    TrainHistory,
};
