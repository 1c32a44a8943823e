use serde::{Deserialize, Serialize};

use crate::nn::extended::ExtendedLoss;
use crate::nn::model::{check_one_hot, model_backward, Mode};
use rand::Rng;

use crate::nn::{Activation, LayerSpec, ModelSpec, ParameterBundle};
use crate::{Result, Tensor};

/// Worst-case agreement between analytic and central-difference gradients for
/// one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub layer: String,
    pub name: String,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub scalars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub step: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradientCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares backpropagated gradients against central differences with step
/// `step`. Dropout is disabled for both sides. The difference quotients are
/// evaluated in double-double precision (see [`crate::nn::extended`]).
pub fn gradient_check(
    spec: &ModelSpec,
    params: &ParameterBundle,
    x: &Tensor,
    target: &[f64],
    tolerance: f64,
    step: f64,
) -> Result<GradientCheckReport> {
    let (analytic, _) = model_backward(spec, params, x, target, Mode::Eval)?;
    compare_gradients(spec, params, x, target, &analytic, tolerance, step)
}

/// Checks a caller-supplied analytic gradient against central differences.
pub fn compare_gradients(
    spec: &ModelSpec,
    params: &ParameterBundle,
    x: &Tensor,
    target: &[f64],
    analytic: &ParameterBundle,
    tolerance: f64,
    step: f64,
) -> Result<GradientCheckReport> {
    let class = check_one_hot(target, spec.num_classes)?;
    analytic.check_matches(spec)?;
    let mut reference = ExtendedLoss::new(spec, params, x, class)?;
    let mut tensors = Vec::new();
    for (li, layer) in params.layers.iter().enumerate() {
        for (ti, nt) in layer.tensors.iter().enumerate() {
            let grad = analytic.layers[li].tensors[ti].tensor.data();
            let mut max_rel: f64 = 0.0;
            let mut max_abs: f64 = 0.0;
            for (k, &g) in grad.iter().enumerate() {
                let numeric = reference.central_difference(li, ti, k, step);
                max_rel = max_rel.max(relative_error(g, numeric));
                max_abs = max_abs.max((g - numeric).abs());
            }
            tensors.push(TensorCheck {
                layer: spec.layer_label(li),
                name: nt.name.clone(),
                max_rel_error: max_rel,
                max_abs_error: max_abs,
                scalars: nt.tensor.len(),
            });
        }
    }
    let passed = tensors.iter().all(|t| t.max_rel_error < tolerance);
    Ok(GradientCheckReport {
        tensors,
        step,
        tolerance,
        passed,
    })
}

/// Small models covering every layer type, each ending in softmax, for
/// gradient checks.
pub fn layer_suites() -> Vec<ModelSpec> {
    let out = |k| LayerSpec::Dense {
        units: k,
        activation: Activation::Softmax,
    };
    let mk = |name: &str, len, ch, k, layers: Vec<LayerSpec>| ModelSpec {
        name: name.into(),
        input_len: len,
        input_channels: ch,
        num_classes: k,
        layers,
    };
    vec![
        mk("dense", 1, 5, 3, vec![LayerSpec::Flatten, out(3)]),
        mk(
            "dense_stack",
            4,
            3,
            4,
            vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 6,
                    activation: Activation::Tanh,
                },
                LayerSpec::Dense {
                    units: 5,
                    activation: Activation::Relu,
                },
                out(4),
            ],
        ),
        mk(
            "conv1d",
            12,
            3,
            3,
            vec![
                LayerSpec::Conv1d {
                    filters: 4,
                    kernel: 3,
                    activation: Activation::Tanh,
                },
                LayerSpec::Conv1d {
                    filters: 3,
                    kernel: 2,
                    activation: Activation::Relu,
                },
                LayerSpec::MaxPool1d { pool: 2 },
                LayerSpec::Flatten,
                out(3),
            ],
        ),
        mk(
            "conv1d_gmp",
            10,
            2,
            3,
            vec![
                LayerSpec::Conv1d {
                    filters: 5,
                    kernel: 4,
                    activation: Activation::None,
                },
                LayerSpec::GlobalMaxPool1d,
                out(3),
            ],
        ),
        mk(
            "simple_rnn",
            8,
            3,
            3,
            vec![
                LayerSpec::SimpleRnn {
                    units: 5,
                    activation: Activation::Tanh,
                    return_sequences: true,
                },
                LayerSpec::SimpleRnn {
                    units: 4,
                    activation: Activation::Relu,
                    return_sequences: false,
                },
                out(3),
            ],
        ),
        mk(
            "lstm",
            10,
            6,
            3,
            vec![
                LayerSpec::Lstm {
                    units: 4,
                    activation: Activation::Tanh,
                    return_sequences: false,
                },
                out(3),
            ],
        ),
        mk(
            "lstm_stack",
            6,
            3,
            2,
            vec![
                LayerSpec::Lstm {
                    units: 3,
                    activation: Activation::Tanh,
                    return_sequences: true,
                },
                LayerSpec::Lstm {
                    units: 3,
                    activation: Activation::Tanh,
                    return_sequences: false,
                },
                out(2),
            ],
        ),
        mk(
            "gru",
            10,
            6,
            3,
            vec![
                LayerSpec::Gru {
                    units: 4,
                    activation: Activation::Tanh,
                    return_sequences: true,
                },
                LayerSpec::Gru {
                    units: 3,
                    activation: Activation::Tanh,
                    return_sequences: false,
                },
                out(3),
            ],
        ),
        mk(
            "hybrid",
            12,
            3,
            4,
            vec![
                LayerSpec::Conv1d {
                    filters: 4,
                    kernel: 3,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { rate: 0.3 },
                LayerSpec::Gru {
                    units: 3,
                    activation: Activation::Tanh,
                    return_sequences: false,
                },
                LayerSpec::Dense {
                    units: 5,
                    activation: Activation::Tanh,
                },
                out(4),
            ],
        ),
    ]
}

/// [`gradient_check`] at Glorot weights, a uniform input in `[-1, 1)` and a
/// random one-hot target, all drawn from `seed`.
pub fn random_gradient_check(spec: &ModelSpec, seed: u64, tolerance: f64, step: f64) -> Result<GradientCheckReport> {
    let mut rng = crate::rng::stream(seed);
    let params = ParameterBundle::glorot(spec, &mut rng)?;
    let n = spec.input_len * spec.input_channels;
    let x = Tensor::new(
        vec![spec.input_len, spec.input_channels],
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let mut target = vec![0.0; spec.num_classes];
    target[rng.gen_range(0..spec.num_classes)] = 1.0;
    gradient_check(spec, &params, &x, &target, tolerance, step)
}
