//! Loss, Adam, early stopping and the mini-batch training loop.

mod adam;
mod config;
mod early_stop;
mod fit;
pub mod loss;
mod trace;

pub use adam::{adam_step, AdamState};
pub use config::TrainConfig;
pub use early_stop::EarlyStopState;
pub use fit::{evaluate, fit, stratified_split, Evaluation, FitOutcome, Sample, Trainer};
pub use loss::{batch_crossentropy, categorical_crossentropy, PROB_FLOOR};
pub use trace::{EpochRecord, TrainTrace};
