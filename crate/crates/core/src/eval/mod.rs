//! Leave-one-subject-out benchmarking, metrics, and reports.

mod emit;
mod metrics;
mod reference;
mod run;

pub use emit::{emit_report, folds_csv, plotdata, read_report, render_summary, table1_csv, ReportFormat};
pub use metrics::{
    accuracy, aggregate_stats, confusion_matrix, error_reduction, AggregateStats, ConfusionMatrix, CLASSES,
};
pub use reference::{reference_for, table1_reference, ReferenceRow};
pub use run::{
    aggregate_folds, fold_data, fold_seed, pairwise, run_benchmark, run_fold, train_fold, BenchmarkConfig,
    BenchmarkReport, FoldData, FoldOutcome, FoldReport, ModelAggregate, Normalization, PairwiseEntry, RunOptions,
    REPORT_SCHEMA_VERSION,
};
