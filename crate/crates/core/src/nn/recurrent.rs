//! Recurrent kernels: simple RNN, LSTM, and the double-bias GRU.
//!
//! All cells start from a zero state. Weight layouts:
//!
//! | cell | input kernel | recurrent kernel | bias |
//! |------|--------------|------------------|------|
//! | simple RNN | `[C_in, u]` | `[u, u]` | `[u]` |
//! | LSTM | `[C_in, 4u]` gates `(i, f, g, o)` | `[u, 4u]` | `[4u]` |
//! | GRU | `[C_in, 3u]` gates `(z, r, h)` | `[u, 3u]` | input `[3u]` + recurrent `[3u]` |
//!
//! LSTM and GRU gates (`i, f, o`, `z, r`) use the logistic sigmoid; the layer
//! activation is used for the LSTM candidate and cell-output squash and for the
//! GRU candidate.
//!
//! GRU candidate: `h~ = act(x W_h + b_in,h + r ⊙ (h_prev U_h + b_rec,h))`,
//! update `h = z ⊙ h_prev + (1 − z) ⊙ h~`.

use crate::nn::activation::sigmoid;
use crate::nn::layers::{affine_row, axpy, dot};
use crate::nn::Activation;
use crate::{Error, Result, Tensor};

fn check_recurrent(
    layer: &str,
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    biases: &[&Tensor],
    gates: usize,
) -> Result<(usize, usize, usize)> {
    if x.rank() != 2 {
        return Err(Error::shape(layer, "[L, C_in]", format!("{:?}", x.shape())));
    }
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    if len == 0 {
        return Err(Error::shape(layer, "at least one time step", "0"));
    }
    if u.rank() != 2 || u.shape()[1] % gates != 0 || u.shape()[0] * gates != u.shape()[1] {
        return Err(Error::shape(
            layer,
            format!("[u, {gates}u] recurrent kernel"),
            format!("{:?}", u.shape()),
        ));
    }
    let units = u.shape()[0];
    if w.shape() != [c_in, gates * units] {
        return Err(Error::shape(
            layer,
            format!("[{c_in}, {}] kernel", gates * units),
            format!("{:?}", w.shape()),
        ));
    }
    for b in biases {
        if b.shape() != [gates * units] {
            return Err(Error::shape(
                layer,
                format!("bias [{}]", gates * units),
                format!("{:?}", b.shape()),
            ));
        }
    }
    Ok((len, c_in, units))
}

fn select_output(states: Vec<f64>, len: usize, units: usize, return_sequences: bool) -> Result<Tensor> {
    if return_sequences {
        Tensor::new(vec![len, units], states)
    } else {
        Ok(Tensor::vector(states[(len - 1) * units..].to_vec()))
    }
}

/// `r += h · M` for a row vector `h` and row-major `M` of width `r.len()`.
#[inline]
fn add_row_times(r: &mut [f64], h: &[f64], m: &[f64]) {
    let width = r.len();
    for (i, &hv) in h.iter().enumerate() {
        if hv == 0.0 {
            continue;
        }
        axpy(hv, &m[i * width..(i + 1) * width], r);
    }
}

/// `dst[i] += Σ_j g[j] M[i, j]` (the product `g Mᵀ`) and `G[i, j] += v[i] g[j]`.
#[inline]
fn backprop_matrix(v: &[f64], g: &[f64], m: &[f64], grad_m: &mut [f64], dst: &mut [f64]) {
    let width = g.len();
    for i in 0..v.len() {
        let row = &m[i * width..(i + 1) * width];
        let grow = &mut grad_m[i * width..(i + 1) * width];
        axpy(v[i], g, grow);
        dst[i] += dot(row, g);
    }
}

// ----- simple RNN -----

/// `h_t = act(x_t W + h_{t-1} U + b)`.
pub fn simple_rnn_forward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    b: &Tensor,
    activation: Activation,
    return_sequences: bool,
) -> Result<Tensor> {
    let (len, _, units) = check_recurrent("simple_rnn", x, w, u, &[b], 1)?;
    let states = simple_rnn_states(x, w, u, b, activation);
    select_output(states, len, units, return_sequences)
}

/// All hidden states, row-major `[L, u]`.
pub(crate) fn simple_rnn_states(x: &Tensor, w: &Tensor, u: &Tensor, b: &Tensor, activation: Activation) -> Vec<f64> {
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let units = u.shape()[0];
    let mut hs = vec![0.0; len * units];
    let mut a = vec![0.0; units];
    for t in 0..len {
        affine_row(&x.data()[t * c_in..(t + 1) * c_in], w.data(), b.data(), &mut a);
        if t > 0 {
            let (prev, _) = hs.split_at(t * units);
            add_row_times(&mut a, &prev[(t - 1) * units..], u.data());
        }
        for (h, &av) in hs[t * units..(t + 1) * units].iter_mut().zip(&a) {
            *h = activation.apply(av);
        }
    }
    hs
}

/// BPTT through a simple RNN. `grad_hs` is `dL/dh_t` for every step (zeros
/// where the step was not emitted). Returns `dL/dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn simple_rnn_backward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    hs: &[f64],
    grad_hs: &[f64],
    activation: Activation,
    grad_w: &mut [f64],
    grad_u: &mut [f64],
    grad_b: &mut [f64],
) -> Tensor {
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let units = u.shape()[0];
    let mut dx = vec![0.0; len * c_in];
    let mut dh_next = vec![0.0; units];
    let mut da = vec![0.0; units];
    for t in (0..len).rev() {
        let h = &hs[t * units..(t + 1) * units];
        for j in 0..units {
            let dh = grad_hs[t * units + j] + dh_next[j];
            da[j] = dh * activation.derivative_from_output(h[j]);
            grad_b[j] += da[j];
        }
        let x_t = &x.data()[t * c_in..(t + 1) * c_in];
        backprop_matrix(x_t, &da, w.data(), grad_w, &mut dx[t * c_in..(t + 1) * c_in]);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        if t > 0 {
            let h_prev = &hs[(t - 1) * units..t * units];
            backprop_matrix(h_prev, &da, u.data(), grad_u, &mut dh_next);
        }
    }
    Tensor::new(vec![len, c_in], dx).expect("shape of x")
}

// ----- LSTM -----

/// Per-step values kept for the backward pass.
pub(crate) struct LstmTrace {
    /// Post-activation gates `(i, f, g, o)` per step, `[L, 4u]`.
    gates: Vec<f64>,
    /// Cell states `[L, u]`.
    cells: Vec<f64>,
    /// `act(c_t)`, `[L, u]`.
    squashed: Vec<f64>,
    /// Hidden states `[L, u]`.
    pub(crate) hs: Vec<f64>,
}

/// Standard LSTM: `c_t = f⊙c_{t-1} + i⊙g`, `h_t = o⊙act(c_t)`.
pub fn lstm_forward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    b: &Tensor,
    activation: Activation,
    return_sequences: bool,
) -> Result<Tensor> {
    let (len, _, units) = check_recurrent("lstm", x, w, u, &[b], 4)?;
    let trace = lstm_trace(x, w, u, b, activation);
    select_output(trace.hs, len, units, return_sequences)
}

pub(crate) fn lstm_trace(x: &Tensor, w: &Tensor, u: &Tensor, b: &Tensor, activation: Activation) -> LstmTrace {
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let units = u.shape()[0];
    let g4 = 4 * units;
    let mut tr = LstmTrace {
        gates: vec![0.0; len * g4],
        cells: vec![0.0; len * units],
        squashed: vec![0.0; len * units],
        hs: vec![0.0; len * units],
    };
    let mut a = vec![0.0; g4];
    for t in 0..len {
        affine_row(&x.data()[t * c_in..(t + 1) * c_in], w.data(), b.data(), &mut a);
        if t > 0 {
            add_row_times(&mut a, &tr.hs[(t - 1) * units..t * units], u.data());
        }
        let gates = &mut tr.gates[t * g4..(t + 1) * g4];
        for j in 0..units {
            gates[j] = sigmoid(a[j]);
            gates[units + j] = sigmoid(a[units + j]);
            gates[2 * units + j] = activation.apply(a[2 * units + j]);
            gates[3 * units + j] = sigmoid(a[3 * units + j]);
        }
        for j in 0..units {
            let c_prev = if t > 0 { tr.cells[(t - 1) * units + j] } else { 0.0 };
            let c = gates[units + j] * c_prev + gates[j] * gates[2 * units + j];
            let s = activation.apply(c);
            tr.cells[t * units + j] = c;
            tr.squashed[t * units + j] = s;
            tr.hs[t * units + j] = gates[3 * units + j] * s;
        }
    }
    tr
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_backward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    tr: &LstmTrace,
    grad_hs: &[f64],
    activation: Activation,
    grad_w: &mut [f64],
    grad_u: &mut [f64],
    grad_b: &mut [f64],
) -> Tensor {
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let units = u.shape()[0];
    let g4 = 4 * units;
    let mut dx = vec![0.0; len * c_in];
    let mut dh_next = vec![0.0; units];
    let mut dc_next = vec![0.0; units];
    let mut da = vec![0.0; g4];
    for t in (0..len).rev() {
        let gates = &tr.gates[t * g4..(t + 1) * g4];
        for j in 0..units {
            let (i, f, g, o) = (gates[j], gates[units + j], gates[2 * units + j], gates[3 * units + j]);
            let s = tr.squashed[t * units + j];
            let c_prev = if t > 0 { tr.cells[(t - 1) * units + j] } else { 0.0 };
            let dh = grad_hs[t * units + j] + dh_next[j];
            let d_o = dh * s;
            let dc = dc_next[j] + dh * o * activation.derivative_from_output(s);
            let di = dc * g;
            let dg = dc * i;
            let df = dc * c_prev;
            dc_next[j] = dc * f;
            da[j] = di * i * (1.0 - i);
            da[units + j] = df * f * (1.0 - f);
            da[2 * units + j] = dg * activation.derivative_from_output(g);
            da[3 * units + j] = d_o * o * (1.0 - o);
        }
        for (gb, d) in grad_b.iter_mut().zip(&da) {
            *gb += d;
        }
        let x_t = &x.data()[t * c_in..(t + 1) * c_in];
        backprop_matrix(x_t, &da, w.data(), grad_w, &mut dx[t * c_in..(t + 1) * c_in]);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        if t > 0 {
            backprop_matrix(&tr.hs[(t - 1) * units..t * units], &da, u.data(), grad_u, &mut dh_next);
        }
    }
    Tensor::new(vec![len, c_in], dx).expect("shape of x")
}

// ----- GRU -----

pub(crate) struct GruTrace {
    /// `(z, r, h~)` per step, `[L, 3u]`.
    gates: Vec<f64>,
    /// Recurrent-side candidate pre-activation `h_prev U_h + b_rec,h`, `[L, u]`.
    rec_candidate: Vec<f64>,
    pub(crate) hs: Vec<f64>,
}

/// Double-bias GRU (separate input-side and recurrent-side bias vectors).
#[allow(clippy::too_many_arguments)]
pub fn gru_forward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    b_in: &Tensor,
    b_rec: &Tensor,
    activation: Activation,
    return_sequences: bool,
) -> Result<Tensor> {
    let (len, _, units) = check_recurrent("gru", x, w, u, &[b_in, b_rec], 3)?;
    let trace = gru_trace(x, w, u, b_in, b_rec, activation);
    select_output(trace.hs, len, units, return_sequences)
}

pub(crate) fn gru_trace(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    b_in: &Tensor,
    b_rec: &Tensor,
    activation: Activation,
) -> GruTrace {
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let units = u.shape()[0];
    let g3 = 3 * units;
    let mut tr = GruTrace {
        gates: vec![0.0; len * g3],
        rec_candidate: vec![0.0; len * units],
        hs: vec![0.0; len * units],
    };
    let mut ax = vec![0.0; g3];
    let mut ah = vec![0.0; g3];
    for t in 0..len {
        affine_row(&x.data()[t * c_in..(t + 1) * c_in], w.data(), b_in.data(), &mut ax);
        ah.copy_from_slice(b_rec.data());
        if t > 0 {
            add_row_times(&mut ah, &tr.hs[(t - 1) * units..t * units], u.data());
        }
        for j in 0..units {
            let z = sigmoid(ax[j] + ah[j]);
            let r = sigmoid(ax[units + j] + ah[units + j]);
            let rec = ah[2 * units + j];
            let cand = activation.apply(ax[2 * units + j] + r * rec);
            let h_prev = if t > 0 { tr.hs[(t - 1) * units + j] } else { 0.0 };
            tr.gates[t * g3 + j] = z;
            tr.gates[t * g3 + units + j] = r;
            tr.gates[t * g3 + 2 * units + j] = cand;
            tr.rec_candidate[t * units + j] = rec;
            tr.hs[t * units + j] = z * h_prev + (1.0 - z) * cand;
        }
    }
    tr
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn gru_backward(
    x: &Tensor,
    w: &Tensor,
    u: &Tensor,
    tr: &GruTrace,
    grad_hs: &[f64],
    activation: Activation,
    grad_w: &mut [f64],
    grad_u: &mut [f64],
    grad_b_in: &mut [f64],
    grad_b_rec: &mut [f64],
) -> Tensor {
    let (len, c_in) = (x.shape()[0], x.shape()[1]);
    let units = u.shape()[0];
    let g3 = 3 * units;
    let mut dx = vec![0.0; len * c_in];
    let mut dh_next = vec![0.0; units];
    let mut gx = vec![0.0; g3];
    let mut gh = vec![0.0; g3];
    let mut dh_direct = vec![0.0; units];
    for t in (0..len).rev() {
        let gates = &tr.gates[t * g3..(t + 1) * g3];
        for j in 0..units {
            let (z, r, cand) = (gates[j], gates[units + j], gates[2 * units + j]);
            let h_prev = if t > 0 { tr.hs[(t - 1) * units + j] } else { 0.0 };
            let dh = grad_hs[t * units + j] + dh_next[j];
            let dz = dh * (h_prev - cand);
            let dcand = dh * (1.0 - z);
            dh_direct[j] = dh * z;
            let da_cand = dcand * activation.derivative_from_output(cand);
            let dr = da_cand * tr.rec_candidate[t * units + j];
            let da_z = dz * z * (1.0 - z);
            let da_r = dr * r * (1.0 - r);
            gx[j] = da_z;
            gx[units + j] = da_r;
            gx[2 * units + j] = da_cand;
            gh[j] = da_z;
            gh[units + j] = da_r;
            gh[2 * units + j] = da_cand * r;
        }
        for k in 0..g3 {
            grad_b_in[k] += gx[k];
            grad_b_rec[k] += gh[k];
        }
        let x_t = &x.data()[t * c_in..(t + 1) * c_in];
        backprop_matrix(x_t, &gx, w.data(), grad_w, &mut dx[t * c_in..(t + 1) * c_in]);
        dh_next.copy_from_slice(&dh_direct);
        if t > 0 {
            backprop_matrix(&tr.hs[(t - 1) * units..t * units], &gh, u.data(), grad_u, &mut dh_next);
        }
    }
    Tensor::new(vec![len, c_in], dx).expect("shape of x")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_zero_bias_keeps_zero_state() {
        let x = Tensor::zeros(&[5, 3]);
        let w = Tensor::new(vec![3, 8], (0..24).map(|v| v as f64 * 0.1).collect()).unwrap();
        let u = Tensor::new(vec![2, 8], (0..16).map(|v| v as f64 * -0.1).collect()).unwrap();
        let b = Tensor::zeros(&[8]);
        let h = lstm_forward(&x, &w, &u, &b, Activation::Tanh, true).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));

        let w3 = Tensor::new(vec![3, 6], vec![0.3; 18]).unwrap();
        let u3 = Tensor::new(vec![2, 6], vec![0.2; 12]).unwrap();
        let z = Tensor::zeros(&[6]);
        let h = gru_forward(&x, &w3, &u3, &z, &z, Activation::Tanh, true).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));

        let w1 = Tensor::new(vec![3, 2], vec![0.7; 6]).unwrap();
        let u1 = Tensor::new(vec![2, 2], vec![0.4; 4]).unwrap();
        for act in [Activation::Relu, Activation::Tanh] {
            let h = simple_rnn_forward(&x, &w1, &u1, &Tensor::zeros(&[2]), act, true).unwrap();
            assert!(h.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_step_rnn_is_dense() {
        let x = Tensor::matrix(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
        let w = Tensor::matrix(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let u = Tensor::matrix(2, 2, vec![9.0, 9.0, 9.0, 9.0]).unwrap();
        let b = Tensor::vector(vec![0.05, -0.05]);
        let h = simple_rnn_forward(&x, &w, &u, &b, Activation::Tanh, false).unwrap();
        let d = crate::nn::dense_forward(&Tensor::vector(x.data().to_vec()), &w, &b, Activation::Tanh).unwrap();
        assert_eq!(h.data(), d.data());
    }

    #[test]
    fn return_sequences_last_row_matches_last_state() {
        let x = Tensor::matrix(4, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]).unwrap();
        let w = Tensor::matrix(2, 12, (0..24).map(|v| (v as f64 * 0.37).sin()).collect()).unwrap();
        let u = Tensor::matrix(3, 12, (0..36).map(|v| (v as f64 * 0.11).cos() * 0.5).collect()).unwrap();
        let b = Tensor::vector(vec![0.1; 12]);
        let all = lstm_forward(&x, &w, &u, &b, Activation::Tanh, true).unwrap();
        let last = lstm_forward(&x, &w, &u, &b, Activation::Tanh, false).unwrap();
        assert_eq!(all.row(3), last.data());
    }

    #[test]
    fn gru_rejects_bad_recurrent_kernel() {
        let x = Tensor::zeros(&[2, 3]);
        let err = gru_forward(
            &x,
            &Tensor::zeros(&[3, 6]),
            &Tensor::zeros(&[2, 4]),
            &Tensor::zeros(&[6]),
            &Tensor::zeros(&[6]),
            Activation::Tanh,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }
}
