use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::sha256_hex;
use crate::data::{make_loso_folds, FoldAssignment, Normalizer, Provenance, SubjectId, Window, WindowedDataset};
use crate::eval::metrics::{aggregate_stats, confusion_matrix, error_reduction, AggregateStats, ConfusionMatrix};
use crate::nn::{ModelSpec, ParameterBundle};
use crate::rng::derive_seed;
use crate::train::{evaluate, fit, Evaluation, Sample, TrainConfig, TrainTrace};
use crate::zoo::{build_model, ModelName};
use crate::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Which windows the z-score statistics are fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Training subjects of each fold only.
    #[default]
    PerFold,
    /// Every window of the dataset, test subject included.
    Global,
}

/// Everything that affects fold results.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub train: TrainConfig,
    pub normalization: Normalization,
}

impl BenchmarkConfig {
    /// SHA-256 over this config and the dataset's own config hash.
    pub fn hash(&self, dataset: &Provenance) -> String {
        let json = serde_json::to_vec(&(self, &dataset.config_hash)).expect("config serializes");
        sha256_hex(&json)
    }
}

/// Scheduling only; results do not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
    pub deterministic: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            deterministic: true,
        }
    }
}

/// `hash(master_seed, model, fold)`.
pub fn fold_seed(master: u64, model: ModelName, fold: usize) -> u64 {
    derive_seed(master, &[model.as_str().into(), fold.into()])
}

/// Normalised train and test windows of one fold.
pub struct FoldData {
    pub train: Vec<Window>,
    pub test: Vec<Window>,
    pub normalizer: Normalizer,
}

fn subject_list(s: &[SubjectId]) -> String {
    s.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

pub fn fold_data(ds: &WindowedDataset, fold: &FoldAssignment, normalization: Normalization) -> Result<FoldData> {
    let train_raw: Vec<&Window> = ds
        .windows
        .iter()
        .filter(|w| fold.train_subjects.contains(&w.subject))
        .collect();
    let test_raw: Vec<&Window> = ds.windows.iter().filter(|w| w.subject == fold.test_subject).collect();
    if train_raw.is_empty() || test_raw.is_empty() {
        return Err(Error::Empty(format!(
            "fold {} has no train or no test windows",
            fold.index
        )));
    }
    let normalizer = match normalization {
        Normalization::PerFold => Normalizer::fit(
            train_raw.iter().map(|w| &w.samples),
            format!("subjects {}", subject_list(&fold.train_subjects)),
        )?,
        Normalization::Global => Normalizer::fit(ds.windows.iter().map(|w| &w.samples), "all windows")?,
    };
    Ok(FoldData {
        train: normalizer.apply_windows(train_raw)?,
        test: normalizer.apply_windows(test_raw)?,
        normalizer,
    })
}

/// Trained weights and test metrics of one fold.
pub struct FoldOutcome {
    pub params: ParameterBundle,
    pub trace: TrainTrace,
    pub normalizer: Normalizer,
    pub test: Evaluation,
    pub test_labels: Vec<usize>,
    pub train_windows: usize,
}

/// Fits `spec` on the fold's training subjects and evaluates it on the held-out one.
pub fn train_fold(
    spec: &ModelSpec,
    fold: &FoldAssignment,
    ds: &WindowedDataset,
    config: &BenchmarkConfig,
    seed: u64,
) -> Result<FoldOutcome> {
    let data = fold_data(ds, fold, config.normalization)?;
    if data.test.iter().any(|w| fold.train_subjects.contains(&w.subject)) {
        return Err(Error::InvalidConfig("test windows overlap training subjects".into()));
    }
    let outcome = fit(spec, &data.train, &config.train, seed)?;
    let test = evaluate(spec, &outcome.params, &data.test)?;
    if !test.mean_loss.is_finite() {
        return Err(Error::NonFinite {
            what: "test loss",
            layer: spec.layer_label(spec.layers.len() - 1),
            epoch: outcome.trace.best_epoch,
        });
    }
    Ok(FoldOutcome {
        params: outcome.params,
        trace: outcome.trace,
        normalizer: data.normalizer,
        test_labels: data.test.iter().map(Sample::class).collect(),
        test,
        train_windows: data.train.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub model: ModelName,
    pub fold: usize,
    pub test_subject: SubjectId,
    pub train_subjects: Vec<SubjectId>,
    pub train_windows: usize,
    pub test_windows: usize,
    /// Percent; 0 for failed folds.
    pub accuracy: f64,
    pub loss: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub confusion: ConfusionMatrix,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub seed: u64,
    /// Set when training or evaluation failed; such folds are left out of
    /// every aggregate.
    pub failure: Option<String>,
}

impl FoldReport {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Trains and tests one (model, fold). Errors become a flagged report.
pub fn run_fold(
    model: ModelName,
    fold: &FoldAssignment,
    ds: &WindowedDataset,
    config: &BenchmarkConfig,
    config_hash: &str,
) -> FoldReport {
    let start = Instant::now();
    let seed = fold_seed(config.train.master_seed, model, fold.index);
    let spec = build_model(model);
    let test_windows = ds.windows.iter().filter(|w| w.subject == fold.test_subject).count();
    let mut report = FoldReport {
        model,
        fold: fold.index,
        test_subject: fold.test_subject,
        train_subjects: fold.train_subjects.clone(),
        train_windows: 0,
        test_windows,
        accuracy: 0.0,
        loss: 0.0,
        epochs_run: 0,
        best_epoch: 0,
        stopped_early: false,
        confusion: ConfusionMatrix::default(),
        wall_time_s: 0.0,
        config_hash: config_hash.to_string(),
        seed,
        failure: None,
    };
    let result = train_fold(&spec, fold, ds, config, seed).and_then(|out| {
        let cm = confusion_matrix(&out.test.predictions, &out.test_labels)?;
        Ok((out, cm))
    });
    match result {
        Ok((out, cm)) => {
            report.train_windows = out.train_windows;
            report.accuracy = 100.0 * out.test.accuracy;
            report.loss = out.test.mean_loss;
            report.epochs_run = out.trace.epochs_run;
            report.best_epoch = out.trace.best_epoch;
            report.stopped_early = out.trace.stopped_early;
            report.confusion = cm;
        }
        Err(e) => report.failure = Some(e.to_string()),
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAggregate {
    pub model: ModelName,
    pub attempted: usize,
    pub failed: usize,
    /// `None` when every fold failed.
    pub stats: Option<AggregateStats>,
}

/// Error reduction and raw accuracy gain of `new` over `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseEntry {
    pub base: ModelName,
    pub new: ModelName,
    pub error_reduction: Option<f64>,
    pub accuracy_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub config: BenchmarkConfig,
    pub config_hash: String,
    pub dataset: Provenance,
    /// Always `population`.
    pub std_kind: String,
    pub folds: Vec<FoldReport>,
    pub aggregates: Vec<ModelAggregate>,
    pub pairwise: Vec<PairwiseEntry>,
}

/// Per-model aggregates over successful folds, in first-seen model order.
pub fn aggregate_folds(folds: &[FoldReport]) -> Vec<ModelAggregate> {
    let mut models: Vec<ModelName> = Vec::new();
    for f in folds {
        if !models.contains(&f.model) {
            models.push(f.model);
        }
    }
    models
        .into_iter()
        .map(|model| {
            let mine: Vec<&FoldReport> = folds.iter().filter(|f| f.model == model).collect();
            let ok: Vec<&&FoldReport> = mine.iter().filter(|f| f.succeeded()).collect();
            let acc: Vec<f64> = ok.iter().map(|f| f.accuracy).collect();
            let loss: Vec<f64> = ok.iter().map(|f| f.loss).collect();
            let epochs: Vec<f64> = ok.iter().map(|f| f.epochs_run as f64).collect();
            ModelAggregate {
                model,
                attempted: mine.len(),
                failed: mine.len() - ok.len(),
                stats: aggregate_stats(&acc, &loss, &epochs).ok(),
            }
        })
        .collect()
}

pub fn pairwise(aggregates: &[ModelAggregate]) -> Vec<PairwiseEntry> {
    let mut out = Vec::new();
    for a in aggregates {
        for b in aggregates {
            if a.model == b.model {
                continue;
            }
            if let (Some(sa), Some(sb)) = (&a.stats, &b.stats) {
                out.push(PairwiseEntry {
                    base: a.model,
                    new: b.model,
                    error_reduction: error_reduction(sa.mean_accuracy, sb.mean_accuracy).ok(),
                    accuracy_gain: sb.mean_accuracy - sa.mean_accuracy,
                });
            }
        }
    }
    out
}

impl BenchmarkReport {
    /// Copy with every wall time zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for f in &mut r.folds {
            f.wall_time_s = 0.0;
        }
        r
    }
}

/// Runs every (model, fold) pair. Per-fold seeds make the result independent
/// of `options`; the fold list is always in (model, fold) order.
pub fn run_benchmark(
    models: &[ModelName],
    ds: &WindowedDataset,
    config: &BenchmarkConfig,
    options: RunOptions,
) -> Result<BenchmarkReport> {
    if models.is_empty() {
        return Err(Error::InvalidConfig("no models selected".into()));
    }
    config.train.validate()?;
    let folds = make_loso_folds(&ds.subjects())?;
    let config_hash = config.hash(&ds.provenance);
    let jobs: Vec<(ModelName, &FoldAssignment)> =
        models.iter().flat_map(|&m| folds.iter().map(move |f| (m, f))).collect();
    let run = |&(m, f): &(ModelName, &FoldAssignment)| run_fold(m, f, ds, config, &config_hash);
    let reports: Vec<FoldReport> = if options.deterministic || options.jobs <= 1 {
        jobs.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    };
    let aggregates = aggregate_folds(&reports);
    Ok(BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        config_hash,
        dataset: ds.provenance.clone(),
        std_kind: "population".into(),
        pairwise: pairwise(&aggregates),
        aggregates,
        folds: reports,
    })
}
