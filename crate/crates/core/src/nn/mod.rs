//! Numeric core: layers, activations, model composition, gradients, and
//! weight files.

pub mod activation;
pub(crate) mod dropout;
pub mod extended;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod params;
pub mod recurrent;
pub mod spec;
pub mod weights;

pub use activation::{softmax, Activation};
pub use dropout::dropout_apply;
pub use gradcheck::{
    compare_gradients, gradient_check, layer_suites, random_gradient_check, relative_error, GradientCheckReport,
    TensorCheck,
};
pub use layers::{conv1d_forward, dense_forward, global_maxpool1d_forward, maxpool1d_forward};
pub use model::{accumulate_gradients, model_backward, model_forward, Mode, SampleGradient};
pub use params::{LayerParams, NamedTensor, ParameterBundle};
pub use recurrent::{gru_forward, lstm_forward, simple_rnn_forward};
pub use spec::{FeatureShape, LayerSpec, ModelSpec};
pub use weights::{load_weights, save_weights};
