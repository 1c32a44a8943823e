use crate::nn::{ModelSpec, ParameterBundle};
use crate::train::TrainConfig;
use crate::{Error, Result};

/// First and second moment estimates, one tensor per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ParameterBundle,
    pub v: ParameterBundle,
    pub t: u64,
    labels: Vec<String>,
}

impl AdamState {
    pub fn new(spec: &ModelSpec, params: &ParameterBundle) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            labels: (0..spec.layers.len()).map(|i| spec.layer_label(i)).collect(),
        }
    }
}

/// One bias-corrected Adam update. `t` is incremented before the correction.
///
/// A non-finite gradient aborts without touching `params` or `state`.
pub fn adam_step(
    params: &mut ParameterBundle,
    grads: &ParameterBundle,
    state: &mut AdamState,
    config: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    if let Some(layer) = grads.first_non_finite_layer() {
        return Err(Error::NonFinite {
            what: "gradient",
            layer: state.labels.get(layer).cloned().unwrap_or_else(|| layer.to_string()),
            epoch,
        });
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    let lr = config.learning_rate;
    let eps = config.epsilon;
    let tensors = params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        let p = p.data_mut();
        let (m, v) = (m.data_mut(), v.data_mut());
        for (k, &gk) in g.data().iter().enumerate() {
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
