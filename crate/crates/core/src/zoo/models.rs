use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nn::{Activation, LayerSpec, ModelSpec};
use crate::{Error, Result};

pub const INPUT_LEN: usize = 200;
pub const INPUT_CHANNELS: usize = 6;
pub const NUM_CLASSES: usize = 4;
pub const DROPOUT_RATE: f64 = 0.3;

/// The nine benchmarked architectures, in the order used by reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelName {
    #[serde(rename = "Shallow_NN")]
    ShallowNn,
    #[serde(rename = "DL")]
    Dl,
    #[serde(rename = "RNN")]
    Rnn,
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "GRU")]
    Gru,
    #[serde(rename = "CNN")]
    Cnn,
    #[serde(rename = "CNN_RNN")]
    CnnRnn,
    #[serde(rename = "CNN_GRU")]
    CnnGru,
    #[serde(rename = "CNN_LSTM")]
    CnnLstm,
}

impl ModelName {
    pub const ALL: [ModelName; 9] = [
        ModelName::ShallowNn,
        ModelName::Dl,
        ModelName::Rnn,
        ModelName::Lstm,
        ModelName::Gru,
        ModelName::Cnn,
        ModelName::CnnRnn,
        ModelName::CnnGru,
        ModelName::CnnLstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::ShallowNn => "Shallow_NN",
            ModelName::Dl => "DL",
            ModelName::Rnn => "RNN",
            ModelName::Lstm => "LSTM",
            ModelName::Gru => "GRU",
            ModelName::Cnn => "CNN",
            ModelName::CnnRnn => "CNN_RNN",
            ModelName::CnnGru => "CNN_GRU",
            ModelName::CnnLstm => "CNN_LSTM",
        }
    }

    /// Published trainable-parameter count.
    pub fn expected_params(self) -> usize {
        match self {
            ModelName::ShallowNn => 4_804,
            ModelName::Dl => 39_620,
            ModelName::Rnn => 7_652,
            ModelName::Lstm => 6_884,
            ModelName::Gru => 14_500,
            ModelName::Cnn => 51_308,
            ModelName::CnnRnn => 14_836,
            ModelName::CnnGru => 23_348,
            ModelName::CnnLstm => 27_316,
        }
    }

    pub fn status(self) -> Derivation {
        match self {
            ModelName::Cnn => Derivation::Searched,
            ModelName::CnnRnn | ModelName::CnnGru | ModelName::CnnLstm => Derivation::Reconstructed,
            _ => Derivation::Described,
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    /// Accepts the report names case-insensitively (`cnn_lstm`, `Shallow_NN`).
    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

/// How a model's layer list was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivation {
    /// Fully described in prose.
    Described,
    /// Rebuilt so that the published totals match exactly.
    Reconstructed,
    /// Chosen by [`solve_conv_architecture`](crate::zoo::solve_conv_architecture).
    Searched,
}

fn dense(units: usize, activation: Activation) -> LayerSpec {
    LayerSpec::Dense { units, activation }
}

fn conv(filters: usize, kernel: usize) -> LayerSpec {
    LayerSpec::Conv1d {
        filters,
        kernel,
        activation: Activation::Relu,
    }
}

#[derive(Clone, Copy)]
enum Cell {
    Simple,
    Lstm,
    Gru,
}

fn recurrent(cell: Cell, units: usize, activation: Activation, return_sequences: bool) -> LayerSpec {
    match cell {
        Cell::Simple => LayerSpec::SimpleRnn {
            units,
            activation,
            return_sequences,
        },
        Cell::Lstm => LayerSpec::Lstm {
            units,
            activation,
            return_sequences,
        },
        Cell::Gru => LayerSpec::Gru {
            units,
            activation,
            return_sequences,
        },
    }
}

/// Shared convolutional prefix of the CNN and the three hybrids.
pub fn conv_prefix() -> [LayerSpec; 2] {
    [conv(24, 4), conv(56, 5)]
}

/// Dense widths of the canonical CNN after global max pooling.
pub const CNN_HIDDEN: [usize; 2] = [174, 190];

/// Inserts `Dropout(0.3)` after every layer that has parameters, except the
/// output layer.
pub fn with_dropout(hidden: &[LayerSpec], output: LayerSpec) -> Vec<LayerSpec> {
    let mut layers = Vec::with_capacity(hidden.len() * 2 + 1);
    for &l in hidden {
        layers.push(l);
        if l.is_trainable() {
            layers.push(LayerSpec::Dropout { rate: DROPOUT_RATE });
        }
    }
    layers.push(output);
    layers
}

fn recurrent_stack(cell: Cell) -> [LayerSpec; 3] {
    [
        recurrent(cell, 32, Activation::Tanh, true),
        recurrent(cell, 16, Activation::Tanh, true),
        recurrent(cell, 16, Activation::Tanh, false),
    ]
}

/// The recurrent layers between the convolutional prefix and the dense tail
/// of a hybrid model; `None` for the other models.
pub fn hybrid_recurrent_head(name: ModelName) -> Option<Vec<LayerSpec>> {
    let cell = match name {
        ModelName::CnnRnn => Cell::Simple,
        ModelName::CnnGru => Cell::Gru,
        ModelName::CnnLstm => Cell::Lstm,
        _ => return None,
    };
    Some(recurrent_stack(cell).to_vec())
}

fn hidden_layers(name: ModelName) -> Vec<LayerSpec> {
    use Activation::{Relu, Tanh};
    let relu_tail = [dense(64, Relu), dense(32, Relu)];
    let tanh_tail = [dense(64, Tanh), dense(32, Tanh)];
    let hybrid = |cell| {
        let mut v = conv_prefix().to_vec();
        v.extend(recurrent_stack(cell));
        v.extend(tanh_tail);
        v
    };
    match name {
        ModelName::ShallowNn => vec![LayerSpec::Flatten],
        ModelName::Dl => vec![LayerSpec::Flatten, dense(32, Relu), dense(32, Relu)],
        ModelName::Rnn => {
            let mut v = vec![
                recurrent(Cell::Simple, 32, Relu, true),
                recurrent(Cell::Simple, 32, Relu, false),
            ];
            v.extend(relu_tail);
            v
        }
        ModelName::Lstm => {
            let mut v = vec![
                recurrent(Cell::Lstm, 16, Tanh, true),
                recurrent(Cell::Lstm, 16, Tanh, false),
            ];
            v.extend(tanh_tail);
            v
        }
        ModelName::Gru => {
            let mut v = vec![
                recurrent(Cell::Gru, 32, Tanh, true),
                recurrent(Cell::Gru, 32, Tanh, false),
            ];
            v.extend(relu_tail);
            v
        }
        ModelName::Cnn => {
            let mut v = conv_prefix().to_vec();
            v.push(LayerSpec::GlobalMaxPool1d);
            v.extend(CNN_HIDDEN.map(|u| dense(u, Relu)));
            v
        }
        ModelName::CnnRnn => hybrid(Cell::Simple),
        ModelName::CnnGru => hybrid(Cell::Gru),
        ModelName::CnnLstm => hybrid(Cell::Lstm),
    }
}

/// Canonical specification over `[200, 6]` windows and 4 classes.
pub fn build_model(name: ModelName) -> ModelSpec {
    ModelSpec {
        name: name.as_str().to_string(),
        input_len: INPUT_LEN,
        input_channels: INPUT_CHANNELS,
        num_classes: NUM_CLASSES,
        layers: with_dropout(&hidden_layers(name), dense(NUM_CLASSES, Activation::Softmax)),
    }
}

/// [`build_model`] by report name.
pub fn build_model_named(name: &str) -> Result<ModelSpec> {
    Ok(build_model(name.parse()?))
}
