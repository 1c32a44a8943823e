//! The nine benchmark architectures, parameter-count verification, and the
//! convolutional architecture solver.

mod manifest;
mod models;
mod solver;

pub use manifest::{verify_manifest, verify_param_counts, zoo_manifest, CountRow, ManifestEntry, ZooManifest};
pub use models::{
    build_model, build_model_named, conv_prefix, hybrid_recurrent_head, with_dropout, Derivation, ModelName,
    CNN_HIDDEN, DROPOUT_RATE, INPUT_CHANNELS, INPUT_LEN, NUM_CLASSES,
};
pub use solver::{solve_conv_architecture, CnnCandidate, CnnSearchSpace, ExtraConv, Head, SolveResult, SortKey};
