//! `harbench` command-line driver.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CommonArgs;

#[derive(Parser)]
#[command(name = "harbench", version, about = "Ankle-IMU activity recognition benchmark")]
#[command(after_help = "Exit codes: 0 success, 2 configuration, 3 data, 4 verification, 5 training.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, clean, segment and window raw subject files into a cache.
    Ingest {
        #[command(flatten)]
        common: CommonArgs,
        /// Interpolate missing runs up to this many samples [default: 10].
        #[arg(long)]
        max_gap: Option<usize>,
        /// Comma-separated subject ids to keep [default: 101-108].
        #[arg(long, value_delimiter = ',')]
        subjects: Option<Vec<u16>>,
    },
    /// Write the synthetic dataset to a cache.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of subjects [default: 8].
        #[arg(long)]
        subjects: Option<usize>,
        /// Windows per class over all subjects [default: 100].
        #[arg(long)]
        windows_per_class: Option<usize>,
        /// Standard deviation of the additive noise [default: 0.3].
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Verify the parameter count of every zoo model.
    Params {
        /// Check this manifest instead of the shipped zoo.
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        /// Write the shipped zoo manifest as JSON.
        #[arg(long, value_name = "FILE")]
        export: Option<PathBuf>,
    },
    /// Search convolutional architectures with a given parameter count.
    SolveCnn {
        #[arg(long)]
        target: usize,
        /// Which family to search.
        #[arg(long, default_value = "all", value_parser = ["all", "cnn", "cnn-rnn", "cnn-gru", "cnn-lstm"])]
        family: String,
        /// Matches (or nearest configurations) listed per family.
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        /// Random instances per layer suite.
        #[arg(long, default_value_t = 10)]
        instances: u64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
    /// Train one model on one leave-one-subject-out fold.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: String,
        #[arg(long)]
        fold: usize,
    },
    /// Run leave-one-subject-out cross-validation over several models.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// `all` or a comma-separated list [default: all].
        #[arg(long)]
        models: Option<String>,
        /// Folds trained in parallel [default: available cores].
        #[arg(long)]
        jobs: Option<usize>,
        /// Run folds one after another.
        #[arg(long)]
        deterministic: bool,
        /// Report formats to write.
        #[arg(long, value_delimiter = ',', default_value = "csv,json,plotdata", value_parser = ["csv", "json", "plotdata"])]
        formats: Vec<String>,
    },
    /// Summarise a benchmark report or evaluate a trained fold.
    Report {
        /// `report.json` written by `benchmark`.
        #[arg(long, value_name = "FILE", conflicts_with = "run")]
        report: Option<PathBuf>,
        /// Output directory of `train`.
        #[arg(long, value_name = "DIR", required_unless_present = "report")]
        run: Option<PathBuf>,
        /// Re-emit the report files into this directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest {
            common,
            max_gap,
            subjects,
        } => commands::ingest(&common, max_gap, subjects),
        Command::Synth {
            common,
            subjects,
            windows_per_class,
            noise,
        } => commands::synth(&common, subjects, windows_per_class, noise),
        Command::Params { manifest, export } => commands::params(manifest.as_deref(), export.as_deref()),
        Command::SolveCnn { target, family, top } => commands::solve_cnn(target, &family, top),
        Command::Gradcheck {
            instances,
            tolerance,
            step,
        } => commands::gradcheck(instances, tolerance, step),
        Command::Train { common, model, fold } => commands::train(&common, &model, fold),
        Command::Benchmark {
            common,
            models,
            jobs,
            deterministic,
            formats,
        } => commands::benchmark(&common, models.as_deref(), jobs, deterministic, &formats),
        Command::Report { report, run, out } => commands::report(report.as_deref(), run.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.exit_code()
        }
    }
}
