use serde::{Deserialize, Serialize};

use crate::{Error, Result, Tensor};

/// Element-wise activation attached to a layer.
///
/// `Softmax` is only legal on the final dense layer, where it is fused with the
/// cross-entropy loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Tanh,
    Softmax,
}

impl Activation {
    /// Scalar activation. Softmax is not element-wise and is left untouched here.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None | Activation::Softmax => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output `y = f(x)`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::None | Activation::Softmax => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn apply_slice(self, xs: &mut [f64]) {
        match self {
            Activation::None => {}
            Activation::Softmax => softmax_in_place(xs),
            _ => xs.iter_mut().for_each(|x| *x = self.apply(*x)),
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Numerically stable softmax over a rank-1 tensor.
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    if z.rank() != 1 || z.is_empty() {
        return Err(Error::shape("softmax", "non-empty vector", format!("{:?}", z.shape())));
    }
    let mut out = z.data().to_vec();
    softmax_in_place(&mut out);
    Ok(Tensor::vector(out))
}

/// `ln Σ exp(z_j)` computed without overflow.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
