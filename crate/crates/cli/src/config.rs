//! Resolved run configuration: defaults, then the JSON config file, then flags.

use std::path::{Path, PathBuf};

use clap::Args;
use harbench::data::{generate_synthetic, ingest_dir, read_cache, IngestConfig, SyntheticConfig, WindowedDataset};
use harbench::eval::{BenchmarkConfig, Normalization};
use harbench::zoo::ModelName;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::{CliResult, Context, Failure, Kind};

/// Every setting a command may read. Unset fields in the config file keep
/// their defaults; flags override both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Directory with `subjectNNN.dat` files.
    pub data_dir: Option<PathBuf>,
    /// Windowed dataset cache.
    pub cache: Option<PathBuf>,
    /// Use the generated dataset instead of real data.
    pub synthetic: bool,
    pub synthetic_data: SyntheticConfig,
    pub synthetic_seed: u64,
    pub ingest: IngestConfig,
    pub models: Vec<ModelName>,
    pub benchmark: BenchmarkConfig,
    pub out: PathBuf,
    pub deterministic: bool,
    pub jobs: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            cache: None,
            synthetic: false,
            synthetic_data: SyntheticConfig::default(),
            synthetic_seed: 0,
            ingest: IngestConfig::default(),
            models: ModelName::ALL.to_vec(),
            benchmark: BenchmarkConfig::default(),
            out: PathBuf::from("out"),
            deterministic: false,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl CliConfig {
    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write_resolved(&self, dir: &Path) -> CliResult<PathBuf> {
        #[derive(Serialize)]
        struct Resolved<'a> {
            tool_version: &'a str,
            config_hash: String,
            config: &'a CliConfig,
        }
        let path = dir.join("config.json");
        let body = Resolved {
            tool_version: env!("CARGO_PKG_VERSION"),
            config_hash: self.hash(),
            config: self,
        };
        let mut json = serde_json::to_vec_pretty(&body).map_err(|e| Failure::new(Kind::Config, e))?;
        json.push(b'\n');
        std::fs::create_dir_all(dir).map_err(|e| Failure::new(Kind::Data, e))?;
        std::fs::write(&path, json)
            .map_err(|e| Failure::new(Kind::Data, anyhow::anyhow!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// Loads the dataset named by the config: synthetic, cache, or raw files,
    /// in that order of preference.
    pub fn load_dataset(&self) -> CliResult<WindowedDataset> {
        if self.synthetic {
            let mut cfg = self.synthetic_data.clone();
            cfg.window_len = self.ingest.window_len;
            cfg.stride = self.ingest.stride;
            return Ok(generate_synthetic(&cfg, self.synthetic_seed)?);
        }
        if let Some(path) = &self.cache {
            let bytes = std::fs::read(path)
                .map_err(|e| Failure::new(Kind::Data, anyhow::anyhow!("{}: {e}", path.display())))?;
            let ds = read_cache(&bytes).context(format!("reading cache {}", path.display()))?;
            if ds.provenance.window_len != self.ingest.window_len || ds.provenance.stride != self.ingest.stride {
                return Err(Failure::config(format!(
                    "cache {} was built with window {} / stride {}, but the config asks for {} / {}",
                    path.display(),
                    ds.provenance.window_len,
                    ds.provenance.stride,
                    self.ingest.window_len,
                    self.ingest.stride
                )));
            }
            return Ok(ds);
        }
        if let Some(dir) = &self.data_dir {
            return Ok(ingest_dir(dir, &self.ingest)?);
        }
        Err(Failure::config(
            "no data source: pass --synthetic, --cache FILE or --data DIR",
        ))
    }
}

/// Flags shared by the commands that load data or train.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags given here override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory with PAMAP2 `subjectNNN.dat` files.
    #[arg(long = "data", value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Windowed dataset cache written by `ingest` or `synth`.
    #[arg(long, value_name = "FILE")]
    pub cache: Option<PathBuf>,
    /// Use the generated 8-subject dataset.
    #[arg(long)]
    pub synthetic: bool,
    /// Seed of the synthetic generator [default: 0].
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
    /// Window length in samples [default: 200].
    #[arg(long)]
    pub window_len: Option<usize>,
    /// Window stride in samples [default: 60].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Master seed for initialisation, splits, shuffling and dropout [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size [default: 64].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epoch limit [default: 1000].
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Early-stopping patience in epochs [default: 20].
    #[arg(long)]
    pub patience: Option<usize>,
    /// Share of training windows held out for validation [default: 0.1].
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Fit z-score statistics per fold or on all windows [default: per-fold].
    #[arg(long, value_parser = ["per-fold", "global"])]
    pub normalization: Option<String>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn resolve(&self) -> CliResult<CliConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
                serde_json::from_str::<CliConfig>(&text)
                    .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
            }
            None => CliConfig::default(),
        };
        if self.data_dir.is_some() {
            cfg.data_dir = self.data_dir.clone();
        }
        if self.cache.is_some() {
            cfg.cache = self.cache.clone();
        }
        cfg.synthetic |= self.synthetic;
        set(&mut cfg.synthetic_seed, self.synthetic_seed);
        set(&mut cfg.ingest.window_len, self.window_len);
        set(&mut cfg.ingest.stride, self.stride);
        let t = &mut cfg.benchmark.train;
        set(&mut t.master_seed, self.seed);
        set(&mut t.learning_rate, self.lr);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.max_epochs, self.max_epochs);
        set(&mut t.patience, self.patience);
        set(&mut t.validation_fraction, self.validation_fraction);
        if let Some(n) = &self.normalization {
            cfg.benchmark.normalization = if n == "global" {
                Normalization::Global
            } else {
                Normalization::PerFold
            };
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.synthetic_data.window_len = cfg.ingest.window_len;
        cfg.synthetic_data.stride = cfg.ingest.stride;
        cfg.benchmark.train.validate()?;
        if cfg.ingest.window_len == 0 || cfg.ingest.stride == 0 {
            return Err(Failure::config("window length and stride must be positive"));
        }
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses `all` or a comma-separated list of model names.
pub fn parse_models(list: &str) -> CliResult<Vec<ModelName>> {
    if list.eq_ignore_ascii_case("all") {
        return Ok(ModelName::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: ModelName = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Failure::config("no models selected"));
    }
    Ok(out)
}
