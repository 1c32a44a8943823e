use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{LayerSpec, ModelSpec};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

/// Trainable tensors of one layer, in the order given by
/// [`LayerSpec::param_shapes`]. Parameter-free layers hold an empty list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerParams {
    pub tensors: Vec<NamedTensor>,
}

impl LayerParams {
    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i].tensor
    }
}

/// All trainable parameters of a model, one [`LayerParams`] per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBundle {
    pub layers: Vec<LayerParams>,
}

impl ParameterBundle {
    /// Zero-filled bundle with the layout `spec` requires.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let layers = spec
            .layers
            .iter()
            .zip(&shapes)
            .map(|(layer, &input)| LayerParams {
                tensors: layer
                    .param_shapes(input)
                    .into_iter()
                    .map(|(name, shape)| NamedTensor {
                        name: name.to_string(),
                        tensor: Tensor::zeros(&shape),
                    })
                    .collect(),
            })
            .collect();
        Ok(Self { layers })
    }

    /// Glorot-uniform weights and zero biases.
    ///
    /// Fan sizes: dense and recurrent input kernels use `(in, out)` of the
    /// matrix; recurrent kernels `(u, gates·u)`; conv kernels
    /// `(k·C_in, k·C_out)`.
    pub fn glorot<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        let mut bundle = Self::zeros(spec)?;
        for (layer, params) in spec.layers.iter().zip(bundle.layers.iter_mut()) {
            for nt in params.tensors.iter_mut() {
                if !nt.name.contains("kernel") {
                    continue;
                }
                let shape = nt.tensor.shape().to_vec();
                let (fan_in, fan_out) = match layer {
                    LayerSpec::Conv1d { .. } => (shape[1] * shape[2], shape[1] * shape[0]),
                    _ => (shape[0], shape[1]),
                };
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                for v in nt.tensor.data_mut() {
                    *v = dist.sample(rng);
                }
            }
        }
        Ok(bundle)
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.tensors_mut().for_each(|t| t.fill(0.0));
        out
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.tensors.iter().map(|nt| &nt.tensor))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.tensors.iter_mut().map(|nt| &mut nt.tensor))
    }

    /// `(layer index, tensor name, tensor)` for every parameter tensor.
    pub fn named(&self) -> impl Iterator<Item = (usize, &str, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.tensors.iter().map(move |nt| (i, nt.name.as_str(), &nt.tensor)))
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    /// `self += scale * other` for identically laid out bundles.
    pub fn add_scaled(&mut self, other: &ParameterBundle, scale: f64) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            a.add_scaled(b, scale);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors_mut().for_each(|t| t.scale(factor));
    }

    /// Index of the first layer holding a non-finite value.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.tensors.iter().any(|nt| !nt.tensor.all_finite()))
    }

    /// Errors unless every tensor has the shape `spec` requires.
    pub fn check_matches(&self, spec: &ModelSpec) -> Result<()> {
        let expected = Self::zeros(spec)?;
        if expected.layers.len() != self.layers.len() {
            return Err(Error::ParamMismatch(format!(
                "{} expects {} layers, bundle has {}",
                spec.name,
                expected.layers.len(),
                self.layers.len()
            )));
        }
        for (i, (e, got)) in expected.layers.iter().zip(&self.layers).enumerate() {
            if e.tensors.len() != got.tensors.len() {
                return Err(Error::ParamMismatch(format!(
                    "layer {}: expected {} tensors, found {}",
                    spec.layer_label(i),
                    e.tensors.len(),
                    got.tensors.len()
                )));
            }
            for (et, gt) in e.tensors.iter().zip(&got.tensors) {
                if et.tensor.shape() != gt.tensor.shape() {
                    return Err(Error::ParamMismatch(format!(
                        "layer {} `{}`: expected {:?}, found {:?}",
                        spec.layer_label(i),
                        et.name,
                        et.tensor.shape(),
                        gt.tensor.shape()
                    )));
                }
            }
        }
        Ok(())
    }
}
