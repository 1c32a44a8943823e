//! Declarative model descriptions, shape propagation, and parameter counting.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::nn::Activation;
use crate::{Error, Result};

/// One layer of a [`ModelSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    SimpleRnn {
        units: usize,
        activation: Activation,
        return_sequences: bool,
    },
    Lstm {
        units: usize,
        activation: Activation,
        return_sequences: bool,
    },
    Gru {
        units: usize,
        activation: Activation,
        return_sequences: bool,
    },
    Conv1d {
        filters: usize,
        kernel: usize,
        activation: Activation,
    },
    MaxPool1d {
        pool: usize,
    },
    GlobalMaxPool1d,
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::SimpleRnn { .. } => "simple_rnn",
            LayerSpec::Lstm { .. } => "lstm",
            LayerSpec::Gru { .. } => "gru",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::MaxPool1d { .. } => "max_pool1d",
            LayerSpec::GlobalMaxPool1d => "global_max_pool1d",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    pub fn activation(&self) -> Option<Activation> {
        match *self {
            LayerSpec::Dense { activation, .. }
            | LayerSpec::SimpleRnn { activation, .. }
            | LayerSpec::Lstm { activation, .. }
            | LayerSpec::Gru { activation, .. }
            | LayerSpec::Conv1d { activation, .. } => Some(activation),
            _ => None,
        }
    }

    /// True for layers that own trainable parameters.
    pub fn is_trainable(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { .. }
                | LayerSpec::SimpleRnn { .. }
                | LayerSpec::Lstm { .. }
                | LayerSpec::Gru { .. }
                | LayerSpec::Conv1d { .. }
        )
    }

    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: FeatureShape) -> Result<FeatureShape> {
        use FeatureShape::*;
        let positive = |n: usize, what: &str| {
            if n == 0 {
                Err(Error::InvalidSpec(format!(
                    "{} {what} must be positive",
                    self.kind_name()
                )))
            } else {
                Ok(())
            }
        };
        let needs_sequence = || Err(Error::shape(self.kind_name(), "sequence input [L, C]", input));
        match (*self, input) {
            (LayerSpec::Flatten, Sequence { len, channels }) => Ok(Flat(len * channels)),
            (LayerSpec::Flatten, Flat(n)) => Ok(Flat(n)),
            (LayerSpec::Dense { units, .. }, Flat(_)) => {
                positive(units, "units")?;
                Ok(Flat(units))
            }
            (LayerSpec::Dense { .. }, Sequence { .. }) => Err(Error::shape("dense", "flat input", input)),
            (
                LayerSpec::SimpleRnn {
                    units,
                    return_sequences,
                    ..
                }
                | LayerSpec::Lstm {
                    units,
                    return_sequences,
                    ..
                }
                | LayerSpec::Gru {
                    units,
                    return_sequences,
                    ..
                },
                Sequence { len, .. },
            ) => {
                positive(units, "units")?;
                Ok(if return_sequences {
                    Sequence { len, channels: units }
                } else {
                    Flat(units)
                })
            }
            (LayerSpec::Conv1d { filters, kernel, .. }, Sequence { len, .. }) => {
                positive(filters, "filters")?;
                positive(kernel, "kernel")?;
                if len < kernel {
                    return Err(Error::WindowTooShort {
                        layer: "conv1d".into(),
                        len,
                        kernel,
                    });
                }
                Ok(Sequence {
                    len: len - kernel + 1,
                    channels: filters,
                })
            }
            (LayerSpec::MaxPool1d { pool }, Sequence { len, channels }) => {
                positive(pool, "pool")?;
                if pool > len {
                    return Err(Error::EmptyPool {
                        layer: "max_pool1d".into(),
                        pool,
                        len,
                    });
                }
                Ok(Sequence {
                    len: len / pool,
                    channels,
                })
            }
            (LayerSpec::GlobalMaxPool1d, Sequence { channels, .. }) => Ok(Flat(channels)),
            (LayerSpec::Dropout { rate }, s) => {
                crate::nn::dropout::check_rate(rate)?;
                Ok(s)
            }
            _ => needs_sequence(),
        }
    }

    /// Named parameter tensor shapes for this layer given its input shape.
    pub fn param_shapes(&self, input: FeatureShape) -> Vec<(&'static str, Vec<usize>)> {
        let width = input.last_dim();
        match *self {
            LayerSpec::Dense { units, .. } => {
                vec![("kernel", vec![width, units]), ("bias", vec![units])]
            }
            LayerSpec::SimpleRnn { units, .. } => vec![
                ("kernel", vec![width, units]),
                ("recurrent_kernel", vec![units, units]),
                ("bias", vec![units]),
            ],
            LayerSpec::Lstm { units, .. } => vec![
                ("kernel", vec![width, 4 * units]),
                ("recurrent_kernel", vec![units, 4 * units]),
                ("bias", vec![4 * units]),
            ],
            LayerSpec::Gru { units, .. } => vec![
                ("kernel", vec![width, 3 * units]),
                ("recurrent_kernel", vec![units, 3 * units]),
                ("input_bias", vec![3 * units]),
                ("recurrent_bias", vec![3 * units]),
            ],
            LayerSpec::Conv1d { filters, kernel, .. } => {
                vec![("kernel", vec![filters, kernel, width]), ("bias", vec![filters])]
            }
            _ => Vec::new(),
        }
    }

    /// Closed-form trainable parameter count for an input of width `n_in`.
    pub fn param_count_for(&self, n_in: usize) -> usize {
        match *self {
            LayerSpec::Dense { units, .. } => n_in * units + units,
            LayerSpec::SimpleRnn { units, .. } => units * (n_in + units + 1),
            LayerSpec::Lstm { units, .. } => 4 * units * (n_in + units + 1),
            LayerSpec::Gru { units, .. } => 3 * units * (n_in + units + 2),
            LayerSpec::Conv1d { filters, kernel, .. } => filters * (kernel * n_in + 1),
            _ => 0,
        }
    }
}

/// Shape of the features flowing between layers of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureShape {
    Sequence { len: usize, channels: usize },
    Flat(usize),
}

impl FeatureShape {
    pub fn last_dim(self) -> usize {
        match self {
            FeatureShape::Sequence { channels, .. } => channels,
            FeatureShape::Flat(n) => n,
        }
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            FeatureShape::Sequence { len, channels } => vec![len, channels],
            FeatureShape::Flat(n) => vec![n],
        }
    }
}

impl std::fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureShape::Sequence { len, channels } => write!(f, "[{len}, {channels}]"),
            FeatureShape::Flat(n) => write!(f, "[{n}]"),
        }
    }
}

/// A complete architecture over `[input_len, input_channels]` windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub input_len: usize,
    pub input_channels: usize,
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    pub fn input_shape(&self) -> FeatureShape {
        FeatureShape::Sequence {
            len: self.input_len,
            channels: self.input_channels,
        }
    }

    /// `"<index>:<kind>"`, used in error messages and weight files.
    pub fn layer_label(&self, index: usize) -> String {
        format!("{index}:{}", self.layers[index].kind_name())
    }

    /// Checks the structural rules and returns the shape entering each layer,
    /// followed by the final output shape.
    pub fn shapes(&self) -> Result<Vec<FeatureShape>> {
        if self.input_len == 0 || self.input_channels == 0 || self.num_classes == 0 {
            return Err(Error::InvalidSpec(format!(
                "{}: input and class counts must be positive",
                self.name
            )));
        }
        let Some(last) = self.layers.last() else {
            return Err(Error::InvalidSpec(format!("{}: no layers", self.name)));
        };
        match *last {
            LayerSpec::Dense {
                units,
                activation: Activation::Softmax,
            } if units == self.num_classes => {}
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "{}: final layer must be Dense({}) with softmax",
                    self.name, self.num_classes
                )))
            }
        }
        let mut shapes = vec![self.input_shape()];
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.activation() == Some(Activation::Softmax) && i + 1 != self.layers.len() {
                return Err(Error::InvalidSpec(format!(
                    "{}: softmax only allowed on the final dense layer (found on {})",
                    self.name,
                    self.layer_label(i)
                )));
            }
            let next = layer
                .output_shape(shapes[i])
                .map_err(|e| e.in_layer(&self.layer_label(i)))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Total trainable scalars from the per-layer closed forms.
    pub fn param_count(&self) -> Result<usize> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .map(|(l, s)| l.param_count_for(s.last_dim()))
            .sum())
    }

    /// Per-layer trainable counts (zero for parameter-free layers).
    pub fn layer_param_counts(&self) -> Result<Vec<usize>> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .zip(&shapes)
            .map(|(l, s)| l.param_count_for(s.last_dim()))
            .collect())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> [u8; 32] {
        let canonical = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(&canonical).into()
    }
}

impl Error {
    /// Re-labels a layer-level error with the layer's position in a model.
    pub(crate) fn in_layer(self, label: &str) -> Self {
        match self {
            Error::Shape { expected, got, .. } => Error::Shape {
                layer: label.to_string(),
                expected,
                got,
            },
            Error::WindowTooShort { len, kernel, .. } => Error::WindowTooShort {
                layer: label.to_string(),
                len,
                kernel,
            },
            Error::EmptyPool { pool, len, .. } => Error::EmptyPool {
                layer: label.to_string(),
                pool,
                len,
            },
            other => other,
        }
    }
}
