//! Optimiser, training loop, early stopping and evaluation.

use harbench::data::{generate_synthetic, Normalizer, SyntheticConfig, Window};
use harbench::nn::{Activation, LayerSpec, ModelSpec, ParameterBundle};
use harbench::rng;
use harbench::train::*;
use harbench::zoo::{build_model, ModelName};
use harbench::Tensor;
use proptest::prelude::*;

fn normalized_synthetic(seed: u64) -> Vec<Window> {
    let ds = generate_synthetic(&SyntheticConfig::default(), seed).unwrap();
    let n = Normalizer::fit(ds.windows.iter().map(|w| &w.samples), "all").unwrap();
    n.apply_windows(&ds.windows).unwrap()
}

fn balanced_subset(windows: &[Window], per_class: usize) -> Vec<Window> {
    let mut out = Vec::new();
    for c in 0..4 {
        out.extend(
            windows
                .iter()
                .filter(|w| w.class() == c)
                .step_by(7)
                .take(per_class)
                .cloned(),
        );
    }
    out
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let data = balanced_subset(&normalized_synthetic(1), 5);
    let spec = build_model(ModelName::Dl);
    let mut params = ParameterBundle::glorot(&spec, &mut rng::stream(3)).unwrap();
    let before = params.clone();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        batch_size: 4,
        ..Default::default()
    };
    let mut t = Trainer::new(&spec, &params, &cfg, 9).unwrap();
    let loss = t.train_epoch(&mut params, &data).unwrap();
    assert!(loss > 0.0);
    assert_eq!(params, before);
}

#[test]
fn empty_training_set_errors() {
    let spec = build_model(ModelName::ShallowNn);
    let mut params = ParameterBundle::zeros(&spec).unwrap();
    let mut t = Trainer::new(&spec, &params, &TrainConfig::default(), 0).unwrap();
    let none: Vec<Window> = Vec::new();
    assert!(t.train_epoch(&mut params, &none).is_err());
    assert!(evaluate(&spec, &params, &none).is_err());
}

#[test]
fn epochs_are_reproducible() {
    let data = balanced_subset(&normalized_synthetic(2), 8);
    let spec = build_model(ModelName::Dl);
    let cfg = TrainConfig {
        batch_size: 8,
        ..Default::default()
    };
    let run = || {
        let mut params = ParameterBundle::glorot(&spec, &mut rng::stream(4)).unwrap();
        let mut t = Trainer::new(&spec, &params, &cfg, 11).unwrap();
        let losses: Vec<f64> = (0..4).map(|_| t.train_epoch(&mut params, &data).unwrap()).collect();
        (losses, params)
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
}

#[test]
fn small_subset_overfits() {
    let data = balanced_subset(&normalized_synthetic(3), 8);
    assert_eq!(data.len(), 32);
    let spec = build_model(ModelName::Dl);
    let mut params = ParameterBundle::glorot(&spec, &mut rng::stream(5)).unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        ..Default::default()
    };
    let mut t = Trainer::new(&spec, &params, &cfg, 12).unwrap();
    let mut acc = 0.0;
    for _ in 0..200 {
        t.train_epoch(&mut params, &data).unwrap();
        acc = evaluate(&spec, &params, &data).unwrap().accuracy;
        if acc == 1.0 {
            break;
        }
    }
    assert_eq!(acc, 1.0);
}

fn fixture_spec() -> ModelSpec {
    ModelSpec {
        name: "fixture".into(),
        input_len: 1,
        input_channels: 4,
        num_classes: 4,
        layers: vec![
            LayerSpec::Flatten,
            LayerSpec::Dense {
                units: 4,
                activation: Activation::Softmax,
            },
        ],
    }
}

fn scaled_identity(scale: f64) -> ParameterBundle {
    let spec = fixture_spec();
    let mut p = ParameterBundle::zeros(&spec).unwrap();
    let w = p.layers[1].tensors[0].tensor.data_mut();
    for i in 0..4 {
        w[i * 4 + i] = scale;
    }
    p
}

fn one_hot_input(c: usize) -> Tensor {
    let mut v = vec![0.0; 4];
    v[c] = 1.0;
    Tensor::new(vec![1, 4], v).unwrap()
}

#[test]
fn evaluate_fixtures() {
    let spec = fixture_spec();
    let perfect: Vec<(Tensor, usize)> = (0..4).map(|c| (one_hot_input(c), c)).collect();
    let ev = evaluate(&spec, &scaled_identity(100.0), &perfect).unwrap();
    assert_eq!(ev.accuracy, 1.0);
    assert!(ev.mean_loss < 1e-9);

    let uniform = evaluate(&spec, &ParameterBundle::zeros(&spec).unwrap(), &perfect).unwrap();
    assert_eq!(uniform.accuracy, 0.25);
    assert_eq!(uniform.predictions, [0, 0, 0, 0]);
    assert!((uniform.mean_loss - 4f64.ln()).abs() < 1e-12);

    // predictions are the argmax of the input: 0, 1, 2, 3, 1 against labels 0, 1, 2, 0, 2
    let five: Vec<(Tensor, usize)> = [(0, 0), (1, 1), (2, 2), (3, 0), (1, 2)]
        .into_iter()
        .map(|(x, y)| (one_hot_input(x), y))
        .collect();
    let ev = evaluate(&spec, &scaled_identity(3.0), &five).unwrap();
    assert_eq!(ev.predictions, [0, 1, 2, 3, 1]);
    assert!((ev.accuracy - 0.6).abs() < 1e-15);
}

fn small_config() -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        max_epochs: 15,
        patience: 3,
        learning_rate: 2e-3,
        ..Default::default()
    }
}

#[test]
fn fit_improves_and_restores_best_weights() {
    let data = normalized_synthetic(4);
    let spec = build_model(ModelName::Dl);
    let out = fit(&spec, &data, &small_config(), 21).unwrap();
    let t = &out.trace;
    assert!(t.epochs_run <= 15);
    assert_eq!(t.epochs.len(), t.epochs_run);
    let best = t.best().unwrap();
    assert!(best.val_loss < t.initial_val_loss);
    let min = t.epochs.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    assert_eq!(best.val_loss, min);
    // restored weights reproduce the best validation loss
    let val: Vec<&Window> = out.validation.iter().map(|&i| &data[i]).collect();
    let ev = evaluate(&spec, &out.params, &val).unwrap();
    assert_eq!(ev.mean_loss, min);
    assert!(t.epochs.iter().all(|r| ev.mean_loss <= r.val_loss));
}

#[test]
fn fit_is_deterministic() {
    let data = balanced_subset(&normalized_synthetic(5), 20);
    let spec = build_model(ModelName::Dl);
    let a = fit(&spec, &data, &small_config(), 33).unwrap();
    let b = fit(&spec, &data, &small_config(), 33).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.params, b.params);
    let c = fit(&spec, &data, &small_config(), 34).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn patience_beyond_budget_never_stops_early() {
    let data = balanced_subset(&normalized_synthetic(6), 10);
    let spec = build_model(ModelName::ShallowNn);
    let cfg = TrainConfig {
        max_epochs: 4,
        patience: 4,
        batch_size: 8,
        ..Default::default()
    };
    let out = fit(&spec, &data, &cfg, 1).unwrap();
    assert_eq!(out.trace.epochs_run, 4);
    assert!(!out.trace.stopped_early);
}

#[test]
fn missing_class_is_a_config_error() {
    let data: Vec<Window> = normalized_synthetic(7).into_iter().filter(|w| w.class() != 2).collect();
    let spec = build_model(ModelName::ShallowNn);
    assert!(matches!(
        fit(&spec, &data, &small_config(), 1),
        Err(harbench::Error::InvalidConfig(_))
    ));
}

#[test]
fn stratified_split_keeps_every_class() {
    let classes: Vec<usize> = (0..100).map(|i| i % 4).collect();
    let (train, val) = stratified_split(&classes, 4, 0.1, &mut rng::stream(0)).unwrap();
    assert_eq!(train.len() + val.len(), 100);
    for c in 0..4 {
        assert!(val.iter().any(|&i| classes[i] == c));
        assert!(train.iter().any(|&i| classes[i] == c));
    }
    assert!(val.iter().all(|i| !train.contains(i)));
}

#[test]
fn trace_csv_export() {
    let data = balanced_subset(&normalized_synthetic(8), 10);
    let spec = build_model(ModelName::ShallowNn);
    let cfg = TrainConfig {
        max_epochs: 3,
        batch_size: 8,
        ..Default::default()
    };
    let out = fit(&spec, &data, &cfg, 2).unwrap();
    let mut buf = Vec::new();
    out.trace.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + out.trace.epochs_run);
    assert!(text.starts_with("epoch,train_loss,val_loss,val_acc\n1,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn full_batch_loss_strictly_decreases(seed in 0u64..10_000, dl in any::<bool>()) {
        let data = balanced_subset(&normalized_synthetic(seed % 3), 6);
        let spec = build_model(if dl { ModelName::Dl } else { ModelName::ShallowNn });
        let mut params = ParameterBundle::glorot(&spec, &mut rng::stream(seed)).unwrap();
        let cfg = TrainConfig { batch_size: data.len(), ..Default::default() };
        let mut t = Trainer::new(&spec, &params, &cfg, seed).unwrap();
        let mut last = evaluate(&spec, &params, &data).unwrap().mean_loss;
        for _ in 0..5 {
            t.train_epoch(&mut params, &data).unwrap();
            let now = evaluate(&spec, &params, &data).unwrap().mean_loss;
            prop_assert!(now < last, "{now} !< {last}");
            last = now;
        }
    }
}
