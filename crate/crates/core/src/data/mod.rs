//! PAMAP2 ingestion, windowing, normalisation, subject folds, and the
//! synthetic generator.

mod cache;
mod folds;
mod ingest;
mod normalize;
pub mod raw;
mod segment;
mod synthetic;
mod window;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use folds::{make_loso_folds, FoldAssignment};
pub use ingest::{discover_subject_files, ingest_dir, IngestConfig, DEFAULT_MAX_GAP};
pub use normalize::{Normalizer, STD_FLOOR};
pub use raw::{check_plausible, interpolate_gaps, parse_dat, RawRecord, SubjectId, CHANNELS};
pub use segment::{segment_by_activity, Activity, ActivitySegment, MAX_TICK};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use window::{
    build_windows, window_count, Provenance, SegmentInfo, Window, WindowedDataset, CHANNEL_UNITS, WINDOW_LEN,
    WINDOW_STRIDE,
};
