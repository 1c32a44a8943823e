//! Independent naive-loop reference implementations, written from the layer
//! equations with nested `Vec`s and explicit indexing. They share no code with
//! the kernels under test.
#![allow(dead_code)]

use harbench::nn::{
    conv1d_forward, dense_forward, global_maxpool1d_forward, gradient_check, gru_forward, lstm_forward,
    maxpool1d_forward, simple_rnn_forward, Activation, GradientCheckReport, ModelSpec, ParameterBundle,
};
use harbench::{rng as hrng, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(r: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    (0..rows)
        .map(|_| (0..cols).map(|_| r.gen_range(-scale..scale)).collect())
        .collect()
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

pub fn to_tensor(m: &Mat) -> Tensor {
    let rows = m.len();
    let cols = m[0].len();
    Tensor::new(vec![rows, cols], m.iter().flatten().copied().collect()).unwrap()
}

pub fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::None | Activation::Softmax => v,
        Activation::Relu => {
            if v > 0.0 {
                v
            } else {
                0.0
            }
        }
        Activation::Tanh => v.tanh(),
    }
}

pub fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// `y[n][o] = act(Σ_i x[n][i] w[i][o] + b[o])`
pub fn dense(x: &Mat, w: &Mat, b: &[f64], a: Activation) -> Mat {
    let mut out = vec![vec![0.0; b.len()]; x.len()];
    for n in 0..x.len() {
        for o in 0..b.len() {
            let mut s = b[o];
            for i in 0..w.len() {
                s += x[n][i] * w[i][o];
            }
            out[n][o] = act(a, s);
        }
    }
    out
}

/// `w[o][j][i]`
pub fn conv(x: &Mat, w: &[Mat], b: &[f64], a: Activation) -> Mat {
    let k = w[0].len();
    let c_in = x[0].len();
    let out_len = x.len() - k + 1;
    let mut out = vec![vec![0.0; w.len()]; out_len];
    for t in 0..out_len {
        for o in 0..w.len() {
            let mut s = b[o];
            for j in 0..k {
                for i in 0..c_in {
                    s += w[o][j][i] * x[t + j][i];
                }
            }
            out[t][o] = act(a, s);
        }
    }
    out
}

pub fn maxpool(x: &Mat, pool: usize) -> Mat {
    let c = x[0].len();
    let mut out = Vec::new();
    let mut t = 0;
    while t + pool <= x.len() {
        let mut row = vec![f64::NEG_INFINITY; c];
        for dt in 0..pool {
            for ch in 0..c {
                if x[t + dt][ch] > row[ch] {
                    row[ch] = x[t + dt][ch];
                }
            }
        }
        out.push(row);
        t += pool;
    }
    out
}

/// Returns all hidden states.
pub fn rnn(x: &Mat, w: &Mat, u: &Mat, b: &[f64], a: Activation) -> Mat {
    let units = b.len();
    let mut h = vec![0.0; units];
    let mut all = Vec::new();
    for xt in x {
        let mut next = vec![0.0; units];
        for j in 0..units {
            let mut s = b[j];
            for i in 0..xt.len() {
                s += xt[i] * w[i][j];
            }
            for m in 0..units {
                s += h[m] * u[m][j];
            }
            next[j] = act(a, s);
        }
        h = next;
        all.push(h.clone());
    }
    all
}

/// Gate blocks `(i, f, g, o)` of width `u` in the columns of `w`, `uu`, `b`.
pub fn lstm(x: &Mat, w: &Mat, uu: &Mat, b: &[f64], a: Activation) -> Mat {
    let units = b.len() / 4;
    let mut h = vec![0.0; units];
    let mut c = vec![0.0; units];
    let mut all = Vec::new();
    for xt in x {
        let pre = |col: usize, h: &Vec<f64>| {
            let mut s = b[col];
            for i in 0..xt.len() {
                s += xt[i] * w[i][col];
            }
            for m in 0..units {
                s += h[m] * uu[m][col];
            }
            s
        };
        let mut nh = vec![0.0; units];
        let mut nc = vec![0.0; units];
        for j in 0..units {
            let ig = sig(pre(j, &h));
            let fg = sig(pre(units + j, &h));
            let gg = act(a, pre(2 * units + j, &h));
            let og = sig(pre(3 * units + j, &h));
            nc[j] = fg * c[j] + ig * gg;
            nh[j] = og * act(a, nc[j]);
        }
        h = nh;
        c = nc;
        all.push(h.clone());
    }
    all
}

/// Gate blocks `(z, r, h)`; separate input and recurrent biases.
pub fn gru(x: &Mat, w: &Mat, uu: &Mat, b_in: &[f64], b_rec: &[f64], a: Activation) -> Mat {
    let units = b_in.len() / 3;
    let mut h = vec![0.0; units];
    let mut all = Vec::new();
    for xt in x {
        let xs = |col: usize| {
            let mut s = b_in[col];
            for i in 0..xt.len() {
                s += xt[i] * w[i][col];
            }
            s
        };
        let hs = |col: usize, h: &Vec<f64>| {
            let mut s = b_rec[col];
            for m in 0..units {
                s += h[m] * uu[m][col];
            }
            s
        };
        let mut nh = vec![0.0; units];
        for j in 0..units {
            let z = sig(xs(j) + hs(j, &h));
            let r = sig(xs(units + j) + hs(units + j, &h));
            let cand = act(a, xs(2 * units + j) + r * hs(2 * units + j, &h));
            nh[j] = z * h[j] + (1.0 - z) * cand;
        }
        h = nh;
        all.push(h.clone());
    }
    all
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn flat(m: &Mat) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

pub fn gradcheck_models() -> Vec<ModelSpec> {
    harbench::nn::gradcheck::layer_suites()
}

pub fn global_maxpool(x: &Mat) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; x[0].len()];
    for row in x {
        for c in 0..row.len() {
            if row[c] > out[c] {
                out[c] = row[c];
            }
        }
    }
    out
}

/// Gradient check of `spec` at a random input, target and Glorot weights
/// derived from `instance`.
pub fn random_gradcheck(spec: &ModelSpec, instance: u64, tol: f64, step: f64) -> GradientCheckReport {
    let mut r = rng(1000 * instance + spec.layers.len() as u64);
    let params = ParameterBundle::glorot(spec, &mut hrng::stream(r.gen())).unwrap();
    let x = Tensor::new(
        vec![spec.input_len, spec.input_channels],
        random_vec(&mut r, spec.input_len * spec.input_channels, 1.0),
    )
    .unwrap();
    let mut target = vec![0.0; spec.num_classes];
    target[r.gen_range(0..spec.num_classes)] = 1.0;
    gradient_check(spec, &params, &x, &target, tol, step).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Dense,
    Conv1d,
    MaxPool1d,
    GlobalMaxPool1d,
    SimpleRnn,
    Lstm,
    Gru,
}

impl OracleKind {
    pub const ALL: [OracleKind; 7] = [
        OracleKind::Dense,
        OracleKind::Conv1d,
        OracleKind::MaxPool1d,
        OracleKind::GlobalMaxPool1d,
        OracleKind::SimpleRnn,
        OracleKind::Lstm,
        OracleKind::Gru,
    ];
}

fn random_activation(r: &mut ChaCha8Rng) -> Activation {
    [Activation::None, Activation::Relu, Activation::Tanh][r.gen_range(0..3)]
}

/// Largest absolute difference between kernel and oracle on one random
/// instance with random sizes.
pub fn oracle_max_diff(kind: OracleKind, seed: u64) -> f64 {
    let mut r = rng(seed);
    let len = r.gen_range(1..30);
    let c_in = r.gen_range(1..7);
    let units = r.gen_range(1..7);
    let seq = r.gen_bool(0.5);
    let x = random_mat(&mut r, len, c_in, 1.5);
    let xt = to_tensor(&x);
    let last = |m: Mat| if seq { flat(&m) } else { m[len - 1].clone() };
    match kind {
        OracleKind::Dense => {
            let a = random_activation(&mut r);
            let w = random_mat(&mut r, c_in, units, 1.0);
            let b = random_vec(&mut r, units, 1.0);
            let got = dense_forward(&xt, &to_tensor(&w), &Tensor::vector(b.clone()), a).unwrap();
            max_abs_diff(got.data(), &flat(&dense(&x, &w, &b, a)))
        }
        OracleKind::Conv1d => {
            let a = random_activation(&mut r);
            let k = r.gen_range(1..=len.min(8));
            let w: Vec<Mat> = (0..units).map(|_| random_mat(&mut r, k, c_in, 1.0)).collect();
            let b = random_vec(&mut r, units, 1.0);
            let wt = Tensor::new(vec![units, k, c_in], w.iter().flat_map(flat).collect()).unwrap();
            let got = conv1d_forward(&xt, &wt, &Tensor::vector(b.clone()), a).unwrap();
            max_abs_diff(got.data(), &flat(&conv(&x, &w, &b, a)))
        }
        OracleKind::MaxPool1d => {
            let pool = r.gen_range(1..=len.min(6));
            let got = maxpool1d_forward(&xt, pool).unwrap();
            max_abs_diff(got.data(), &flat(&maxpool(&x, pool)))
        }
        OracleKind::GlobalMaxPool1d => {
            let got = global_maxpool1d_forward(&xt).unwrap();
            max_abs_diff(got.data(), &global_maxpool(&x))
        }
        OracleKind::SimpleRnn => {
            let a = random_activation(&mut r);
            let w = random_mat(&mut r, c_in, units, 0.8);
            let u = random_mat(&mut r, units, units, 0.5);
            let b = random_vec(&mut r, units, 0.5);
            let got =
                simple_rnn_forward(&xt, &to_tensor(&w), &to_tensor(&u), &Tensor::vector(b.clone()), a, seq).unwrap();
            max_abs_diff(got.data(), &last(rnn(&x, &w, &u, &b, a)))
        }
        OracleKind::Lstm => {
            let w = random_mat(&mut r, c_in, 4 * units, 0.8);
            let u = random_mat(&mut r, units, 4 * units, 0.5);
            let b = random_vec(&mut r, 4 * units, 0.5);
            let got = lstm_forward(
                &xt,
                &to_tensor(&w),
                &to_tensor(&u),
                &Tensor::vector(b.clone()),
                Activation::Tanh,
                seq,
            )
            .unwrap();
            max_abs_diff(got.data(), &last(lstm(&x, &w, &u, &b, Activation::Tanh)))
        }
        OracleKind::Gru => {
            let w = random_mat(&mut r, c_in, 3 * units, 0.8);
            let u = random_mat(&mut r, units, 3 * units, 0.5);
            let bi = random_vec(&mut r, 3 * units, 0.5);
            let br = random_vec(&mut r, 3 * units, 0.5);
            let got = gru_forward(
                &xt,
                &to_tensor(&w),
                &to_tensor(&u),
                &Tensor::vector(bi.clone()),
                &Tensor::vector(br.clone()),
                Activation::Tanh,
                seq,
            )
            .unwrap();
            max_abs_diff(got.data(), &last(gru(&x, &w, &u, &bi, &br, Activation::Tanh)))
        }
    }
}
