use rand::seq::SliceRandom;

use crate::nn::{accumulate_gradients, model_forward, Mode, ModelSpec, ParameterBundle};
use crate::rng::{named_stream, Prng};
use crate::tensor::argmax;
use crate::train::{adam_step, AdamState, EarlyStopState, EpochRecord, TrainConfig, TrainTrace, PROB_FLOOR};
use crate::{Error, Result, Tensor};

/// A labelled input window.
pub trait Sample {
    fn input(&self) -> &Tensor;
    fn class(&self) -> usize;
}

impl Sample for (Tensor, usize) {
    fn input(&self) -> &Tensor {
        &self.0
    }
    fn class(&self) -> usize {
        self.1
    }
}

impl<S: Sample + ?Sized> Sample for &S {
    fn input(&self) -> &Tensor {
        (**self).input()
    }
    fn class(&self) -> usize {
        (**self).class()
    }
}

fn one_hot(class: usize, classes: usize) -> Result<Vec<f64>> {
    if class >= classes {
        return Err(Error::ClassOutOfRange { index: class, classes });
    }
    let mut y = vec![0.0; classes];
    y[class] = 1.0;
    Ok(y)
}

/// Mini-batch Adam over a fixed model. Owns the optimiser state and the
/// dropout stream; each epoch shuffles with its own stream derived from `seed`.
pub struct Trainer<'a> {
    spec: &'a ModelSpec,
    config: TrainConfig,
    seed: u64,
    adam: AdamState,
    dropout: Prng,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(spec: &'a ModelSpec, params: &ParameterBundle, config: &TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        params.check_matches(spec)?;
        Ok(Self {
            spec,
            config: config.clone(),
            seed,
            adam: AdamState::new(spec, params),
            dropout: named_stream(seed, &["dropout".into()]),
            epoch: 0,
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// One pass over `samples` in shuffled order; the final partial batch is
    /// kept. Returns the mean training loss (dropout active).
    pub fn train_epoch<S: Sample>(&mut self, params: &mut ParameterBundle, samples: &[S]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Empty("training set".into()));
        }
        self.epoch += 1;
        let epoch = self.epoch;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut named_stream(self.seed, &["shuffle".into(), epoch.into()]));

        let classes = self.spec.num_classes;
        let mut grads = params.zeros_like();
        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            for t in grads.tensors_mut() {
                t.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &samples[i];
                let y = one_hot(s.class(), classes)?;
                let sg = accumulate_gradients(
                    self.spec,
                    params,
                    s.input(),
                    &y,
                    Mode::Train(&mut self.dropout),
                    &mut grads,
                )?;
                batch_loss += sg.loss;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "loss",
                    layer: self.spec.layer_label(self.spec.layers.len() - 1),
                    epoch,
                });
            }
            total += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            adam_step(params, &grads, &mut self.adam, &self.config, epoch)?;
        }
        Ok(total / samples.len() as f64)
    }
}

/// Eval-mode metrics over a set of windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Fraction correct in `[0, 1]`.
    pub accuracy: f64,
    pub mean_loss: f64,
    /// Argmax class per window; ties go to the lowest class index.
    pub predictions: Vec<usize>,
}

pub fn evaluate<S: Sample>(spec: &ModelSpec, params: &ParameterBundle, samples: &[S]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let mut predictions = Vec::with_capacity(samples.len());
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        let class = s.class();
        if class >= spec.num_classes {
            return Err(Error::ClassOutOfRange {
                index: class,
                classes: spec.num_classes,
            });
        }
        let p = model_forward(spec, params, s.input(), Mode::Eval)?;
        loss -= p.data()[class].max(PROB_FLOOR).ln();
        let pred = argmax(p.data());
        correct += usize::from(pred == class);
        predictions.push(pred);
    }
    let n = samples.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        mean_loss: loss / n,
        predictions,
    })
}

/// Result of [`fit`]: the restored best-epoch weights and the loss history.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: ParameterBundle,
    pub trace: TrainTrace,
    /// Indices into the `samples` passed to [`fit`] that were held out.
    pub validation: Vec<usize>,
}

/// Stratified hold-out: per class, a shuffled `round(n_c · fraction)` windows
/// (at least one when the class has two or more) go to validation.
pub fn stratified_split(
    classes: &[usize],
    num_classes: usize,
    fraction: f64,
    rng: &mut Prng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &c) in classes.iter().enumerate() {
        if c >= num_classes {
            return Err(Error::ClassOutOfRange {
                index: c,
                classes: num_classes,
            });
        }
        by_class[c].push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (c, mut idx) in by_class.into_iter().enumerate() {
        if idx.is_empty() {
            return Err(Error::InvalidConfig(format!("class {c} has no training windows")));
        }
        idx.shuffle(rng);
        let mut n_val = (idx.len() as f64 * fraction).round() as usize;
        if idx.len() >= 2 {
            n_val = n_val.clamp(1, idx.len() - 1);
        } else {
            n_val = 0;
        }
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// Trains a fresh Glorot-initialised model with early stopping on a
/// stratified validation split of `samples`, then restores the best weights.
///
/// All randomness (split, init, shuffling, dropout) derives from `seed`.
pub fn fit<S: Sample>(spec: &ModelSpec, samples: &[S], config: &TrainConfig, seed: u64) -> Result<FitOutcome> {
    config.validate()?;
    let classes: Vec<usize> = samples.iter().map(|s| s.class()).collect();
    let (train_idx, val_idx) = stratified_split(
        &classes,
        spec.num_classes,
        config.validation_fraction,
        &mut named_stream(seed, &["split".into()]),
    )?;
    if val_idx.is_empty() {
        return Err(Error::InvalidConfig("validation split is empty".into()));
    }
    let train: Vec<&S> = train_idx.iter().map(|&i| &samples[i]).collect();
    let val: Vec<&S> = val_idx.iter().map(|&i| &samples[i]).collect();

    let mut params = ParameterBundle::glorot(spec, &mut named_stream(seed, &["init".into()]))?;
    let initial_val_loss = evaluate(spec, &params, &val)?.mean_loss;
    let mut trainer = Trainer::new(spec, &params, config, seed)?;
    let mut stopper = EarlyStopState::new(config.patience);
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let train_loss = trainer.train_epoch(&mut params, &train)?;
        let ev = evaluate(spec, &params, &val)?;
        if !ev.mean_loss.is_finite() {
            return Err(Error::NonFinite {
                what: "validation loss",
                layer: spec.layer_label(spec.layers.len() - 1),
                epoch,
            });
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: ev.mean_loss,
            val_acc: ev.accuracy,
        });
        if stopper.update(epoch, ev.mean_loss, &params) {
            stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    let best_epoch = stopper.best_epoch();
    let params = stopper.into_best_params().unwrap_or(params);
    Ok(FitOutcome {
        params,
        trace: TrainTrace {
            initial_val_loss,
            epochs_run: epochs.len(),
            epochs,
            best_epoch,
            stopped_early,
        },
        validation: val_idx,
    })
}
