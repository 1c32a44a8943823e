//! Feed-forward layer kernels: dense, valid 1-D convolution, and max pooling.
//!
//! Each kernel has a forward function over [`Tensor`]s and a backward function
//! that returns the input gradient and accumulates parameter gradients into
//! caller-owned buffers. Backward functions take the layer's post-activation
//! output `y`; for a softmax layer `grad_y` is already the gradient at the logits.

use crate::nn::Activation;
use crate::{Error, Result, Tensor};

/// Dot product with four independent accumulators so the loop vectorises.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let (x, y) = (&a[4 * c..4 * c + 4], &b[4 * c..4 * c + 4]);
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha · x`.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (d, &v) in y.iter_mut().zip(x) {
        *d += alpha * v;
    }
}

fn check_dense(x_cols: usize, w: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    if w.rank() != 2 {
        return Err(Error::shape("dense", "rank-2 kernel", format!("{:?}", w.shape())));
    }
    let (n_in, n_out) = (w.shape()[0], w.shape()[1]);
    if x_cols != n_in {
        return Err(Error::shape(
            "dense",
            format!("input width {n_in}"),
            format!("width {x_cols}"),
        ));
    }
    if b.shape() != [n_out] {
        return Err(Error::shape(
            "dense",
            format!("bias [{n_out}]"),
            format!("{:?}", b.shape()),
        ));
    }
    Ok((n_in, n_out))
}

#[inline]
pub(crate) fn affine_row(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let n_out = b.len();
    out.copy_from_slice(b);
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let w_row = &w[i * n_out..(i + 1) * n_out];
        for (o, &wv) in out.iter_mut().zip(w_row) {
            *o += xi * wv;
        }
    }
}

/// `y = act(x W + b)`. `x` is `[in]` or a batch `[n, in]`; `W` is `[in, out]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor, activation: Activation) -> Result<Tensor> {
    let x_cols = *x.shape().last().unwrap_or(&0);
    let rows = match x.rank() {
        1 => 1,
        2 => x.shape()[0],
        _ => return Err(Error::shape("dense", "[in] or [batch, in]", format!("{:?}", x.shape()))),
    };
    let (n_in, n_out) = check_dense(x_cols, w, b)?;
    let mut out = vec![0.0; rows * n_out];
    for r in 0..rows {
        let dst = &mut out[r * n_out..(r + 1) * n_out];
        affine_row(&x.data()[r * n_in..(r + 1) * n_in], w.data(), b.data(), dst);
        activation.apply_slice(dst);
    }
    let shape = if x.rank() == 1 { vec![n_out] } else { vec![rows, n_out] };
    Tensor::new(shape, out)
}

/// Backward pass of one dense row. Returns `dL/dx`.
pub fn dense_backward(
    x: &[f64],
    w: &Tensor,
    y: &[f64],
    grad_y: &[f64],
    activation: Activation,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Vec<f64> {
    let n_out = y.len();
    let da: Vec<f64> = grad_y
        .iter()
        .zip(y)
        .map(|(g, &yv)| g * activation.derivative_from_output(yv))
        .collect();
    for (gb, d) in grad_b.iter_mut().zip(&da) {
        *gb += d;
    }
    let wd = w.data();
    let mut dx = vec![0.0; x.len()];
    for (i, &xi) in x.iter().enumerate() {
        let w_row = &wd[i * n_out..(i + 1) * n_out];
        let gw_row = &mut grad_w[i * n_out..(i + 1) * n_out];
        axpy(xi, &da, gw_row);
        dx[i] = dot(w_row, &da);
    }
    dx
}

fn check_conv(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<(usize, usize, usize, usize)> {
    if x.rank() != 2 {
        return Err(Error::shape("conv1d", "[L, C_in]", format!("{:?}", x.shape())));
    }
    if w.rank() != 3 {
        return Err(Error::shape("conv1d", "[C_out, k, C_in]", format!("{:?}", w.shape())));
    }
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let (c_out, k, w_in) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    if w_in != c_in {
        return Err(Error::shape(
            "conv1d",
            format!("{c_in} input channels"),
            format!("kernel for {w_in}"),
        ));
    }
    if b.shape() != [c_out] {
        return Err(Error::shape(
            "conv1d",
            format!("bias [{c_out}]"),
            format!("{:?}", b.shape()),
        ));
    }
    if len < k {
        return Err(Error::WindowTooShort {
            layer: "conv1d".into(),
            len,
            kernel: k,
        });
    }
    Ok((len, c_in, c_out, k))
}

/// Valid, stride-1 convolution: `out[t,o] = act(Σ_{j,i} W[o,j,i]·x[t+j,i] + b[o])`.
pub fn conv1d_forward(x: &Tensor, w: &Tensor, b: &Tensor, activation: Activation) -> Result<Tensor> {
    let (len, c_in, c_out, k) = check_conv(x, w, b)?;
    let out_len = len - k + 1;
    let span = k * c_in;
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut out = vec![0.0; out_len * c_out];
    for t in 0..out_len {
        // rows t..t+k of x are one contiguous block matching W[o] layout
        let patch = &xd[t * c_in..t * c_in + span];
        let dst = &mut out[t * c_out..(t + 1) * c_out];
        for o in 0..c_out {
            let kernel = &wd[o * span..(o + 1) * span];
            dst[o] = activation.apply(dot(patch, kernel) + bd[o]);
        }
    }
    Tensor::new(vec![out_len, c_out], out)
}

/// Backward pass of [`conv1d_forward`]. Returns `dL/dx` shaped like `x`.
pub fn conv1d_backward(
    x: &Tensor,
    w: &Tensor,
    y: &Tensor,
    grad_y: &[f64],
    activation: Activation,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Tensor {
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let (c_out, k) = (w.shape()[0], w.shape()[1]);
    let out_len = len - k + 1;
    let span = k * c_in;
    let (xd, wd, yd) = (x.data(), w.data(), y.data());
    let mut dx = vec![0.0; len * c_in];
    for t in 0..out_len {
        let patch = &xd[t * c_in..t * c_in + span];
        for o in 0..c_out {
            let idx = t * c_out + o;
            let da = grad_y[idx] * activation.derivative_from_output(yd[idx]);
            if da == 0.0 {
                continue;
            }
            grad_b[o] += da;
            let kernel = &wd[o * span..(o + 1) * span];
            let gk = &mut grad_w[o * span..(o + 1) * span];
            axpy(da, patch, gk);
            axpy(da, kernel, &mut dx[t * c_in..t * c_in + span]);
        }
    }
    Tensor::new(vec![len, c_in], dx).expect("shape of x")
}

/// Non-overlapping max pooling over time; a trailing remainder shorter than
/// `pool` is dropped.
pub fn maxpool1d_forward(x: &Tensor, pool: usize) -> Result<Tensor> {
    maxpool1d_with_indices(x, pool).map(|(t, _)| t)
}

/// Pooled output plus, per output element, the flat index of the selected input.
pub(crate) fn maxpool1d_with_indices(x: &Tensor, pool: usize) -> Result<(Tensor, Vec<usize>)> {
    if x.rank() != 2 {
        return Err(Error::shape("max_pool1d", "[L, C]", format!("{:?}", x.shape())));
    }
    if pool == 0 {
        return Err(Error::InvalidSpec("pool size must be >= 1".into()));
    }
    let (len, c) = (x.shape()[0], x.shape()[1]);
    if pool > len {
        return Err(Error::EmptyPool {
            layer: "max_pool1d".into(),
            pool,
            len,
        });
    }
    let out_len = len / pool;
    let xd = x.data();
    let mut out = vec![0.0; out_len * c];
    let mut idx = vec![0usize; out_len * c];
    for t in 0..out_len {
        for ch in 0..c {
            let mut best = t * pool * c + ch;
            for j in 1..pool {
                let cand = (t * pool + j) * c + ch;
                if xd[cand] > xd[best] {
                    best = cand;
                }
            }
            out[t * c + ch] = xd[best];
            idx[t * c + ch] = best;
        }
    }
    Ok((Tensor::new(vec![out_len, c], out)?, idx))
}

/// Maximum over the time axis: `[L, C] -> [C]`.
pub fn global_maxpool1d_forward(x: &Tensor) -> Result<Tensor> {
    global_maxpool1d_with_indices(x).map(|(t, _)| t)
}

pub(crate) fn global_maxpool1d_with_indices(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    if x.rank() != 2 || x.shape()[0] == 0 {
        return Err(Error::shape(
            "global_max_pool1d",
            "[L >= 1, C]",
            format!("{:?}", x.shape()),
        ));
    }
    let (len, c) = (x.shape()[0], x.shape()[1]);
    let xd = x.data();
    let mut out = Vec::with_capacity(c);
    let mut idx = Vec::with_capacity(c);
    for ch in 0..c {
        let mut best = ch;
        for t in 1..len {
            let cand = t * c + ch;
            if xd[cand] > xd[best] {
                best = cand;
            }
        }
        out.push(xd[best]);
        idx.push(best);
    }
    Ok((Tensor::vector(out), idx))
}

/// Routes each output gradient back to the input position that won the max.
pub(crate) fn scatter_max_grad(input_shape: &[usize], indices: &[usize], grad_y: &[f64]) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&i, &g) in indices.iter().zip(grad_y) {
        d[i] += g;
    }
    dx
}
