//! Whole-model forward and backward passes over a single window.

use crate::nn::dropout::dropout_mask;
use crate::nn::layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, global_maxpool1d_with_indices,
    maxpool1d_with_indices, scatter_max_grad,
};
use crate::nn::recurrent::{
    gru_backward, gru_trace, lstm_backward, lstm_trace, simple_rnn_backward, simple_rnn_states, GruTrace, LstmTrace,
};
use crate::nn::{Activation, LayerSpec, ModelSpec, ParameterBundle};
use crate::rng::Prng;
use crate::{Error, Result, Tensor};

/// Whether dropout is active for a forward pass.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Prng),
}

enum Cache {
    Nothing,
    Reshape(Vec<usize>),
    Dense {
        x: Tensor,
        y: Tensor,
    },
    Conv {
        x: Tensor,
        y: Tensor,
    },
    Pool {
        input_shape: Vec<usize>,
        indices: Vec<usize>,
    },
    Rnn {
        x: Tensor,
        hs: Vec<f64>,
        last_only: bool,
    },
    Lstm {
        x: Tensor,
        trace: LstmTrace,
        last_only: bool,
    },
    Gru {
        x: Tensor,
        trace: GruTrace,
        last_only: bool,
    },
    Dropout(Option<Vec<f64>>),
}

fn sequence_output(hs: Vec<f64>, len: usize, units: usize, return_sequences: bool) -> Result<Tensor> {
    if return_sequences {
        Tensor::new(vec![len, units], hs)
    } else {
        Ok(Tensor::vector(hs[(len - 1) * units..].to_vec()))
    }
}

fn check_input(spec: &ModelSpec, x: &Tensor) -> Result<()> {
    if x.shape() != [spec.input_len, spec.input_channels] {
        return Err(Error::shape(
            "input",
            format!("[{}, {}]", spec.input_len, spec.input_channels),
            format!("{:?}", x.shape()),
        ));
    }
    Ok(())
}

/// Runs every layer; returns class probabilities and, when `keep` is set,
/// the per-layer caches needed for backpropagation.
fn run(
    spec: &ModelSpec,
    params: &ParameterBundle,
    x: &Tensor,
    mut mode: Mode<'_>,
    keep: bool,
    logits: bool,
) -> Result<(Tensor, Vec<Cache>)> {
    check_input(spec, x)?;
    params.check_matches(spec)?;
    let mut caches = Vec::with_capacity(if keep { spec.layers.len() } else { 0 });
    let mut h = x.clone();
    for (i, layer) in spec.layers.iter().enumerate() {
        let p = &params.layers[i];
        let label = || spec.layer_label(i);
        let (out, cache) = match *layer {
            LayerSpec::Flatten => {
                let shape = h.shape().to_vec();
                let n = h.len();
                (h.reshape(vec![n])?, Cache::Reshape(shape))
            }
            LayerSpec::Dense { activation, .. } => {
                let last = i + 1 == spec.layers.len();
                let activation = if logits && last { Activation::None } else { activation };
                let y = dense_forward(&h, p.get(0), p.get(1), activation).map_err(|e| e.in_layer(&label()))?;
                let cache = if keep {
                    Cache::Dense { x: h, y: y.clone() }
                } else {
                    Cache::Nothing
                };
                (y, cache)
            }
            LayerSpec::Conv1d { activation, .. } => {
                let y = conv1d_forward(&h, p.get(0), p.get(1), activation).map_err(|e| e.in_layer(&label()))?;
                let cache = if keep {
                    Cache::Conv { x: h, y: y.clone() }
                } else {
                    Cache::Nothing
                };
                (y, cache)
            }
            LayerSpec::MaxPool1d { pool } => {
                let (y, indices) = maxpool1d_with_indices(&h, pool).map_err(|e| e.in_layer(&label()))?;
                let input_shape = h.shape().to_vec();
                (y, Cache::Pool { input_shape, indices })
            }
            LayerSpec::GlobalMaxPool1d => {
                let (y, indices) = global_maxpool1d_with_indices(&h).map_err(|e| e.in_layer(&label()))?;
                let input_shape = h.shape().to_vec();
                (y, Cache::Pool { input_shape, indices })
            }
            LayerSpec::SimpleRnn {
                units,
                activation,
                return_sequences,
            } => {
                let hs = simple_rnn_states(&h, p.get(0), p.get(1), p.get(2), activation);
                let y = sequence_output(hs.clone(), h.shape()[0], units, return_sequences)?;
                let cache = if keep {
                    Cache::Rnn {
                        x: h,
                        hs,
                        last_only: !return_sequences,
                    }
                } else {
                    Cache::Nothing
                };
                (y, cache)
            }
            LayerSpec::Lstm {
                units,
                activation,
                return_sequences,
            } => {
                let trace = lstm_trace(&h, p.get(0), p.get(1), p.get(2), activation);
                let y = sequence_output(trace.hs.clone(), h.shape()[0], units, return_sequences)?;
                let cache = if keep {
                    Cache::Lstm {
                        x: h,
                        trace,
                        last_only: !return_sequences,
                    }
                } else {
                    Cache::Nothing
                };
                (y, cache)
            }
            LayerSpec::Gru {
                units,
                activation,
                return_sequences,
            } => {
                let trace = gru_trace(&h, p.get(0), p.get(1), p.get(2), p.get(3), activation);
                let y = sequence_output(trace.hs.clone(), h.shape()[0], units, return_sequences)?;
                let cache = if keep {
                    Cache::Gru {
                        x: h,
                        trace,
                        last_only: !return_sequences,
                    }
                } else {
                    Cache::Nothing
                };
                (y, cache)
            }
            LayerSpec::Dropout { rate } => match &mut mode {
                Mode::Train(rng) if rate > 0.0 => {
                    let mask = dropout_mask(h.len(), rate, &mut **rng);
                    let mut y = h;
                    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    (y, Cache::Dropout(Some(mask)))
                }
                _ => (h, Cache::Dropout(None)),
            },
        };
        if keep {
            caches.push(cache);
        }
        h = out;
    }
    Ok((h, caches))
}

/// Class probabilities for one `[T, C]` window.
pub fn model_forward(spec: &ModelSpec, params: &ParameterBundle, x: &Tensor, mode: Mode<'_>) -> Result<Tensor> {
    run(spec, params, x, mode, false, false).map(|(p, _)| p)
}

/// Loss value and probabilities from one training-mode backward pass.
#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub loss: f64,
    pub probs: Tensor,
}

pub(crate) fn check_one_hot(target: &[f64], classes: usize) -> Result<usize> {
    if target.len() != classes {
        return Err(Error::NotOneHot { classes });
    }
    let ones = target.iter().filter(|&&v| v == 1.0).count();
    let zeros = target.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || zeros != classes - 1 {
        return Err(Error::NotOneHot { classes });
    }
    Ok(target.iter().position(|&v| v == 1.0).unwrap_or(0))
}

/// Forward + backward for one window, adding `dL/dθ` into `grads`.
///
/// The loss is categorical cross-entropy on the softmax output; the gradient
/// at the output logits is the fused `p − y`.
pub fn accumulate_gradients(
    spec: &ModelSpec,
    params: &ParameterBundle,
    x: &Tensor,
    target: &[f64],
    mode: Mode<'_>,
    grads: &mut ParameterBundle,
) -> Result<SampleGradient> {
    let class = check_one_hot(target, spec.num_classes)?;
    let (probs, caches) = run(spec, params, x, mode, true, false)?;
    let loss = -probs.data()[class].max(crate::train::PROB_FLOOR).ln();
    let mut grad: Vec<f64> = probs.data().iter().zip(target).map(|(p, y)| p - y).collect();
    let mut grad_shape = vec![spec.num_classes];

    for (i, cache) in caches.iter().enumerate().rev() {
        let layer = &spec.layers[i];
        let p = &params.layers[i];
        let g = &mut grads.layers[i];
        let (next, shape): (Vec<f64>, Vec<usize>) = match (cache, layer) {
            (Cache::Reshape(shape), _) => (grad, shape.clone()),
            (Cache::Dense { x, y }, LayerSpec::Dense { activation, .. }) => {
                let [gw, gb] = two_mut(&mut g.tensors, 0, 1);
                let dx = dense_backward(x.data(), p.get(0), y.data(), &grad, *activation, gw, gb);
                (dx, x.shape().to_vec())
            }
            (Cache::Conv { x, y }, LayerSpec::Conv1d { activation, .. }) => {
                let [gw, gb] = two_mut(&mut g.tensors, 0, 1);
                let dx = conv1d_backward(x, p.get(0), y, &grad, *activation, gw, gb);
                (dx.into_data(), x.shape().to_vec())
            }
            (Cache::Pool { input_shape, indices }, _) => {
                let dx = scatter_max_grad(input_shape, indices, &grad);
                (dx.into_data(), input_shape.clone())
            }
            (Cache::Rnn { x, hs, last_only }, LayerSpec::SimpleRnn { activation, .. }) => {
                let grad_hs = expand_last(grad, hs.len(), *last_only);
                let mut it = g.tensors.iter_mut().map(|nt| nt.tensor.data_mut());
                let (gw, gu, gb) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                let dx = simple_rnn_backward(x, p.get(0), p.get(1), hs, &grad_hs, *activation, gw, gu, gb);
                (dx.into_data(), x.shape().to_vec())
            }
            (Cache::Lstm { x, trace, last_only }, LayerSpec::Lstm { activation, .. }) => {
                let grad_hs = expand_last(grad, trace.hs.len(), *last_only);
                let mut it = g.tensors.iter_mut().map(|nt| nt.tensor.data_mut());
                let (gw, gu, gb) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                let dx = lstm_backward(x, p.get(0), p.get(1), trace, &grad_hs, *activation, gw, gu, gb);
                (dx.into_data(), x.shape().to_vec())
            }
            (Cache::Gru { x, trace, last_only }, LayerSpec::Gru { activation, .. }) => {
                let grad_hs = expand_last(grad, trace.hs.len(), *last_only);
                let mut it = g.tensors.iter_mut().map(|nt| nt.tensor.data_mut());
                let (gw, gu, gbi, gbr) = (
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                );
                let dx = gru_backward(x, p.get(0), p.get(1), trace, &grad_hs, *activation, gw, gu, gbi, gbr);
                (dx.into_data(), x.shape().to_vec())
            }
            (Cache::Dropout(mask), _) => {
                if let Some(mask) = mask {
                    for (v, m) in grad.iter_mut().zip(mask) {
                        *v *= m;
                    }
                }
                (grad, grad_shape)
            }
            (Cache::Nothing, _) => unreachable!("caches are always kept for backward"),
            _ => unreachable!("cache kind follows layer kind"),
        };
        grad = next;
        grad_shape = shape;
    }
    Ok(SampleGradient { loss, probs })
}

/// `dL/dθ` for one window under categorical cross-entropy.
pub fn model_backward(
    spec: &ModelSpec,
    params: &ParameterBundle,
    x: &Tensor,
    target: &[f64],
    mode: Mode<'_>,
) -> Result<(ParameterBundle, SampleGradient)> {
    let mut grads = params.zeros_like();
    let sg = accumulate_gradients(spec, params, x, target, mode, &mut grads)?;
    Ok((grads, sg))
}

fn expand_last(grad: Vec<f64>, total: usize, last_only: bool) -> Vec<f64> {
    if !last_only {
        return grad;
    }
    let mut full = vec![0.0; total];
    let units = grad.len();
    full[total - units..].copy_from_slice(&grad);
    full
}

fn two_mut(tensors: &mut [crate::nn::NamedTensor], a: usize, b: usize) -> [&mut [f64]; 2] {
    debug_assert!(a < b);
    let (lo, hi) = tensors.split_at_mut(b);
    [lo[a].tensor.data_mut(), hi[0].tensor.data_mut()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn shallow() -> ModelSpec {
        ModelSpec {
            name: "Shallow_NN".into(),
            input_len: 200,
            input_channels: 6,
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

    #[test]
    fn zero_weights_give_uniform_output() {
        let spec = shallow();
        let params = ParameterBundle::zeros(&spec).unwrap();
        let x = Tensor::new(vec![200, 6], (0..1200).map(|v| (v as f64).sin()).collect()).unwrap();
        let p = model_forward(&spec, &params, &x, Mode::Eval).unwrap();
        assert_eq!(p.data(), &[0.25; 4]);
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let spec = shallow();
        let params = ParameterBundle::zeros(&spec).unwrap();
        let err = model_forward(&spec, &params, &Tensor::zeros(&[199, 6]), Mode::Eval).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn non_one_hot_target_rejected() {
        let spec = shallow();
        let params = ParameterBundle::zeros(&spec).unwrap();
        let x = Tensor::zeros(&[200, 6]);
        for bad in [vec![0.5, 0.5, 0.0, 0.0], vec![0.0; 4], vec![1.0, 0.0, 0.0]] {
            let err = model_backward(&spec, &params, &x, &bad, Mode::Eval).unwrap_err();
            assert!(matches!(err, Error::NotOneHot { .. }));
        }
    }

    #[test]
    fn dense_output_gradient_is_outer_product_of_input_and_residual() {
        let spec = ModelSpec {
            name: "d".into(),
            input_len: 1,
            input_channels: 5,
            num_classes: 3,
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    units: 3,
                    activation: Activation::Softmax,
                },
            ],
        };
        let params = ParameterBundle::glorot(&spec, &mut rng::stream(9)).unwrap();
        let xv = vec![0.3, -1.1, 0.8, 2.0, -0.4];
        let x = Tensor::new(vec![1, 5], xv.clone()).unwrap();
        let y = [0.0, 1.0, 0.0];
        let (grads, sg) = model_backward(&spec, &params, &x, &y, Mode::Eval).unwrap();
        let residual: Vec<f64> = sg.probs.data().iter().zip(&y).map(|(p, t)| p - t).collect();
        let gw = grads.layers[1].get(0).data();
        for i in 0..5 {
            for o in 0..3 {
                assert!((gw[i * 3 + o] - xv[i] * residual[o]).abs() < 1e-15);
            }
        }
        assert_eq!(grads.layers[1].get(1).data(), residual.as_slice());
    }
}
