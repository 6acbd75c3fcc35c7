//! File formats: the binary descriptor container, CSV sidecars, and the
//! JSON run configuration.

mod csv_io;
mod descriptor_file;
mod run_config;

pub use csv_io::{
    read_candidates, read_ground_truth, write_bias_table, write_candidates,
    write_ground_truth, write_heatmap, write_histograms, write_history, write_pr_points,
    write_spectrum, write_sweep_results,
};
pub use descriptor_file::{
    load_descriptors, save_biased, save_descriptors, LoadedDescriptors, FLAG_BIASED_QUERY,
    FLAG_BIASED_REFERENCE, FLAG_NORMALIZED, MAGIC,
};
pub use run_config::{EncoderSpec, EvalSection, RunConfig, TrainSection};
