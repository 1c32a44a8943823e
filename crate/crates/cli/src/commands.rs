use std::path::{Path, PathBuf};
use std::time::Instant;

use harbench::data::{make_loso_folds, write_cache, Activity, FoldAssignment, Normalizer, Provenance, WindowedDataset};
use harbench::eval::{
    aggregate_folds, confusion_matrix, emit_report, fold_seed, read_report, render_summary, run_benchmark, train_fold,
    ConfusionMatrix, ReportFormat, RunOptions,
};
use harbench::nn::{layer_suites, load_weights, random_gradient_check, save_weights};
use harbench::rng::derive_seed;
use harbench::train::{evaluate, Sample};
use harbench::zoo::{
    build_model, hybrid_recurrent_head, solve_conv_architecture, verify_manifest, zoo_manifest, CnnSearchSpace,
    ModelName, ZooManifest,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_models, CliConfig, CommonArgs};
use crate::failure::{CliResult, Context, Failure, Kind};

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_failure(path, e))
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::new(Kind::Data, anyhow::anyhow!("{}: {e}", path.display()))
}

fn json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

fn print_counts(ds: &WindowedDataset) {
    print!("{:<8}", "subject");
    for a in Activity::ALL {
        print!(" {:>10}", a.name());
    }
    println!(" {:>8}", "total");
    let counts = ds.counts();
    let mut totals = [0usize; 4];
    for s in ds.subjects() {
        print!("{:<8}", s.to_string());
        let mut row = 0;
        for a in Activity::ALL {
            let n = counts.iter().find(|c| c.0 == s && c.1 == a).map_or(0, |c| c.2);
            totals[a.class_index()] += n;
            row += n;
            print!(" {n:>10}");
        }
        println!(" {row:>8}");
    }
    print!("{:<8}", "all");
    for t in totals {
        print!(" {t:>10}");
    }
    println!(" {:>8}", ds.windows.len());
}

fn require_cache(cfg: &CliConfig) -> CliResult<PathBuf> {
    cfg.cache
        .clone()
        .ok_or_else(|| Failure::config("--cache FILE is required"))
}

fn save_cache(ds: &WindowedDataset, path: &Path) -> CliResult<()> {
    let bytes = write_cache(ds)?;
    write_file(path, &bytes)?;
    println!(
        "wrote {} ({} windows, sha256 {})",
        path.display(),
        ds.windows.len(),
        sha256_hex(&bytes)
    );
    println!("dataset config hash {}", ds.provenance.config_hash);
    Ok(())
}

pub fn ingest(common: &CommonArgs, max_gap: Option<usize>, subjects: Option<Vec<u16>>) -> CliResult {
    let mut cfg = common.resolve()?;
    if let Some(g) = max_gap {
        cfg.ingest.max_gap = g;
    }
    if let Some(s) = subjects {
        cfg.ingest.subjects = s;
    }
    let dir = cfg
        .data_dir
        .clone()
        .ok_or_else(|| Failure::config("--data DIR is required"))?;
    let cache = require_cache(&cfg)?;
    let inside = |p: &Path| std::path::absolute(p).ok();
    if let (Some(d), Some(c)) = (inside(&dir), inside(&cache)) {
        if c.starts_with(&d) {
            return Err(Failure::config(
                "the cache must not be written inside the raw data directory",
            ));
        }
    }
    let ds = harbench::data::ingest_dir(&dir, &cfg.ingest)?;
    print_counts(&ds);
    save_cache(&ds, &cache)
}

pub fn synth(
    common: &CommonArgs,
    subjects: Option<usize>,
    windows_per_class: Option<usize>,
    noise: Option<f64>,
) -> CliResult {
    let mut cfg = common.resolve()?;
    cfg.synthetic = true;
    if let Some(n) = subjects {
        cfg.synthetic_data.num_subjects = n;
    }
    if let Some(n) = windows_per_class {
        cfg.synthetic_data.windows_per_class = n;
    }
    if let Some(n) = noise {
        cfg.synthetic_data.noise_std = n;
    }
    let cache = require_cache(&cfg)?;
    let ds = cfg.load_dataset()?;
    print_counts(&ds);
    save_cache(&ds, &cache)
}

pub fn params(manifest: Option<&Path>, export: Option<&Path>) -> CliResult {
    if let Some(path) = export {
        write_file(path, &json_pretty(&zoo_manifest()))?;
        println!("wrote {}", path.display());
    }
    let manifest: ZooManifest = match manifest {
        Some(path) => serde_json::from_slice(&read_file(path)?)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?,
        None => zoo_manifest(),
    };
    let rows = verify_manifest(&manifest);
    println!(
        "{:<11} {:<16} {:>9} {:>9} {:>9} {:>7}  result",
        "model", "derivation", "expected", "computed", "allocated", "delta"
    );
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
    for r in &rows {
        let status = serde_json::to_value(r.status)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        let result = if r.matches {
            "exact"
        } else if r.hard_failure {
            "MISMATCH"
        } else {
            "searched, off target"
        };
        println!(
            "{:<11} {:<16} {:>9} {:>9} {:>9} {:>7}  {result}{}",
            r.name,
            status,
            r.expected,
            opt(r.computed),
            opt(r.allocated),
            r.delta.map_or("-".to_string(), |d| format!("{d:+}")),
            r.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
        );
    }
    let bad: Vec<&str> = rows
        .iter()
        .filter(|r| r.hard_failure)
        .map(|r| r.name.as_str())
        .collect();
    if bad.is_empty() {
        println!(
            "{} of {} counts exact",
            rows.iter().filter(|r| r.matches).count(),
            rows.len()
        );
        Ok(())
    } else {
        Err(Failure::verification(format!(
            "parameter count mismatch: {}",
            bad.join(", ")
        )))
    }
}

fn families(name: &str) -> Vec<(&'static str, CnnSearchSpace)> {
    let mut out = Vec::new();
    if matches!(name, "all" | "cnn") {
        out.push(("cnn", CnnSearchSpace::standard()));
    }
    for (label, model) in [
        ("cnn-rnn", ModelName::CnnRnn),
        ("cnn-gru", ModelName::CnnGru),
        ("cnn-lstm", ModelName::CnnLstm),
    ] {
        if name == "all" || name == label {
            let head = hybrid_recurrent_head(model).expect("hybrid model");
            out.push((label, CnnSearchSpace::hybrid(head)));
        }
    }
    out
}

pub fn solve_cnn(target: usize, family: &str, top: usize) -> CliResult {
    let zoo: Vec<(ModelName, _)> = ModelName::ALL.iter().map(|&m| (m, build_model(m).layers)).collect();
    for (label, space) in families(family) {
        let start = Instant::now();
        let res = solve_conv_architecture(target, &space, top.max(1))?;
        let secs = start.elapsed().as_secs_f64();
        let (list, heading) = if res.exact.is_empty() {
            (&res.nearest, format!("{label}: no exact match for {target}; nearest"))
        } else {
            (
                &res.exact,
                format!("{label}: {} exact matches for {target}", res.exact.len()),
            )
        };
        println!("{heading} ({secs:.2}s)");
        for c in list.iter().take(top) {
            let spec = c.to_spec(&space, label);
            let canonical = zoo
                .iter()
                .find(|(_, layers)| *layers == spec.layers)
                .map(|(m, _)| format!("  [canonical {m}]"))
                .unwrap_or_default();
            println!("  {:>7} {:+6}  {}{canonical}", c.params, c.delta, c.describe(&space));
        }
        if let Some((m, _)) = zoo.iter().find(|(_, layers)| {
            res.exact
                .iter()
                .skip(top)
                .any(|c| c.to_spec(&space, label).layers == *layers)
        }) {
            println!("  (canonical {m} is also among the exact matches)");
        }
    }
    Ok(())
}

pub fn gradcheck(instances: u64, tolerance: f64, step: f64) -> CliResult {
    if instances == 0 || tolerance.is_nan() || tolerance <= 0.0 || step.is_nan() || step <= 0.0 {
        return Err(Failure::config("instances, tolerance and step must be positive"));
    }
    let mut failed = Vec::new();
    println!("{:<12} {:>9} {:>12}  result", "suite", "instances", "max rel err");
    for spec in layer_suites() {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for i in 0..instances {
            let seed = derive_seed(0, &["gradcheck".into(), spec.name.as_str().into(), i.into()]);
            let report = random_gradient_check(&spec, seed, tolerance, step)?;
            worst = worst.max(report.max_rel_error());
            ok &= report.passed;
        }
        println!(
            "{:<12} {:>9} {:>12.3e}  {}",
            spec.name,
            instances,
            worst,
            if ok { "pass" } else { "FAIL" }
        );
        if !ok {
            failed.push(spec.name);
        }
    }
    if failed.is_empty() {
        println!("all suites below {tolerance:e}");
        Ok(())
    } else {
        Err(Failure::verification(format!(
            "gradient check failed: {}",
            failed.join(", ")
        )))
    }
}

/// Written next to the weights by `train`; `report --run` reads it back.
#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    tool_version: String,
    config_hash: String,
    benchmark_config_hash: String,
    model: ModelName,
    fold: FoldAssignment,
    seed: u64,
    normalizer: Normalizer,
    test_windows: usize,
    test_accuracy: f64,
    test_loss: f64,
    confusion: ConfusionMatrix,
    epochs_run: usize,
    best_epoch: usize,
    stopped_early: bool,
    weights_sha256: String,
    dataset: Provenance,
    config: CliConfig,
}

fn pick_fold(ds: &WindowedDataset, fold: usize) -> CliResult<FoldAssignment> {
    let folds = make_loso_folds(&ds.subjects())?;
    let n = folds.len();
    folds
        .into_iter()
        .nth(fold)
        .ok_or_else(|| Failure::config(format!("fold {fold} does not exist; the dataset has {n} folds")))
}

fn print_confusion(cm: &ConfusionMatrix) {
    print!("{:>12}", "true\\pred");
    for a in Activity::ALL {
        print!(" {:>10}", a.name());
    }
    println!();
    for (row, a) in cm.counts.iter().zip(Activity::ALL) {
        print!("{:>12}", a.name());
        for v in row {
            print!(" {v:>10}");
        }
        println!();
    }
}

pub fn train(common: &CommonArgs, model: &str, fold: usize) -> CliResult {
    let cfg = common.resolve()?;
    let model: ModelName = model.parse()?;
    let ds = cfg.load_dataset()?;
    let assignment = pick_fold(&ds, fold)?;
    let spec = build_model(model);
    let seed = fold_seed(cfg.benchmark.train.master_seed, model, fold);
    println!(
        "training {model} on fold {fold} (test subject {}, seed {seed})",
        assignment.test_subject
    );
    let start = Instant::now();
    let out = train_fold(&spec, &assignment, &ds, &cfg.benchmark, seed).map_err(|e| {
        let f = Failure::from(e);
        let kind = if f.kind == Kind::Data { Kind::Training } else { f.kind };
        Failure::new(kind, f.error.context(format!("training {model} fold {fold}")))
    })?;
    let cm = confusion_matrix(&out.test.predictions, &out.test_labels)?;
    let weights = save_weights(&spec, &out.params)?;
    let dir = &cfg.out;
    write_file(&dir.join("weights.bin"), &weights)?;
    let mut trace = Vec::new();
    out.trace.write_csv(&mut trace)?;
    write_file(&dir.join("trace.csv"), &trace)?;
    let record = RunRecord {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        benchmark_config_hash: cfg.benchmark.hash(&ds.provenance),
        model,
        fold: assignment,
        seed,
        normalizer: out.normalizer,
        test_windows: out.test_labels.len(),
        test_accuracy: 100.0 * out.test.accuracy,
        test_loss: out.test.mean_loss,
        confusion: cm,
        epochs_run: out.trace.epochs_run,
        best_epoch: out.trace.best_epoch,
        stopped_early: out.trace.stopped_early,
        weights_sha256: sha256_hex(&weights),
        dataset: ds.provenance.clone(),
        config: cfg.clone(),
    };
    write_file(&dir.join("run.json"), &json_pretty(&record))?;
    cfg.write_resolved(dir)?;
    println!(
        "{} epochs (best {}, {}) in {:.1}s",
        record.epochs_run,
        record.best_epoch,
        if record.stopped_early {
            "stopped early"
        } else {
            "epoch limit"
        },
        start.elapsed().as_secs_f64()
    );
    println!(
        "test accuracy {:.2}%  loss {:.4}",
        record.test_accuracy, record.test_loss
    );
    print_confusion(&cm);
    println!(
        "wrote weights.bin, trace.csv, run.json, config.json to {}",
        dir.display()
    );
    Ok(())
}

pub fn benchmark(
    common: &CommonArgs,
    models: Option<&str>,
    jobs: Option<usize>,
    deterministic: bool,
    formats: &[String],
) -> CliResult {
    let mut cfg = common.resolve()?;
    if let Some(list) = models {
        cfg.models = parse_models(list)?;
    }
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Failure::config("--jobs must be at least 1"));
        }
        cfg.jobs = j;
    }
    cfg.deterministic |= deterministic;
    let formats: Vec<ReportFormat> = formats
        .iter()
        .map(|f| match f.as_str() {
            "csv" => ReportFormat::Csv,
            "json" => ReportFormat::Json,
            _ => ReportFormat::PlotData,
        })
        .collect();
    let ds = cfg.load_dataset()?;
    let options = RunOptions {
        jobs: cfg.jobs,
        deterministic: cfg.deterministic,
    };
    println!(
        "{} models x {} folds on {} windows",
        cfg.models.len(),
        ds.subjects().len(),
        ds.windows.len()
    );
    let report = run_benchmark(&cfg.models, &ds, &cfg.benchmark, options)?;
    let written = emit_report(&report, &cfg.out, &formats)?;
    cfg.write_resolved(&cfg.out)?;
    print!("{}", render_summary(&report));
    for p in &written {
        println!("wrote {}", p.display());
    }
    let failed: Vec<String> = report
        .folds
        .iter()
        .filter(|f| !f.succeeded())
        .map(|f| format!("{} fold {}: {}", f.model, f.fold, f.failure.as_deref().unwrap_or("")))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            Kind::Training,
            anyhow::anyhow!("{} folds failed:\n  {}", failed.len(), failed.join("\n  ")),
        ))
    }
}

pub fn report(report: Option<&Path>, run: Option<&Path>, out: Option<&Path>) -> CliResult {
    if let Some(path) = report {
        let r = read_report(path).context(format!("reading {}", path.display()))?;
        print!("{}", render_summary(&r));
        if aggregate_folds(&r.folds) != r.aggregates {
            return Err(Failure::verification("stored aggregates do not match the stored folds"));
        }
        println!(
            "aggregates consistent with {} fold rows; config hash {}",
            r.folds.len(),
            r.config_hash
        );
        if let Some(dir) = out {
            for p in emit_report(&r, dir, &ReportFormat::ALL)? {
                println!("wrote {}", p.display());
            }
        }
        return Ok(());
    }
    let dir = run.ok_or_else(|| Failure::config("pass --report FILE or --run DIR"))?;
    let record: RunRecord = serde_json::from_slice(&read_file(&dir.join("run.json"))?)
        .map_err(|e| Failure::new(Kind::Data, anyhow::anyhow!("{}: {e}", dir.join("run.json").display())))?;
    let weights = read_file(&dir.join("weights.bin"))?;
    if sha256_hex(&weights) != record.weights_sha256 {
        return Err(Failure::verification(
            "weights.bin does not match the checksum in run.json",
        ));
    }
    let spec = build_model(record.model);
    let params = load_weights(&weights, &spec)?;
    let ds = record.config.load_dataset()?;
    if ds.provenance.config_hash != record.dataset.config_hash {
        return Err(Failure::new(
            Kind::Data,
            anyhow::anyhow!("the dataset differs from the one the run was trained on"),
        ));
    }
    let test: Vec<_> = ds
        .windows
        .iter()
        .filter(|w| w.subject == record.fold.test_subject)
        .collect();
    let test = record.normalizer.apply_windows(test)?;
    let ev = evaluate(&spec, &params, &test)?;
    let labels: Vec<usize> = test.iter().map(Sample::class).collect();
    let cm = confusion_matrix(&ev.predictions, &labels)?;
    println!(
        "{} fold {} (test subject {}), {} windows",
        record.model,
        record.fold.index,
        record.fold.test_subject,
        test.len()
    );
    println!("accuracy {:.2}%  loss {:.4}", 100.0 * ev.accuracy, ev.mean_loss);
    print_confusion(&cm);
    if cm != record.confusion || (100.0 * ev.accuracy - record.test_accuracy).abs() > 1e-9 {
        return Err(Failure::verification(format!(
            "evaluation differs from the recorded run ({:.2}% recorded)",
            record.test_accuracy
        )));
    }
    println!("matches the recorded run (config hash {})", record.config_hash);
    Ok(())
}
