//! Double-double (~106-bit) evaluation of a model's eval-mode loss.
//!
//! The finite-difference side of [`gradient_check`](crate::nn::gradient_check)
//! runs here. With a step of `1e-5`, plain `f64` roundoff in the loss (about
//! `1e-16`) becomes `~1e-11` of noise in the difference quotient, which swamps
//! gradient entries below `~1e-5`. Evaluating the loss in double-double keeps
//! that noise far below the truncation error of the central difference.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::nn::{Activation, LayerSpec, ModelSpec, ParameterBundle};
use crate::{Result, Tensor};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    fn ldexp(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        // exp(r) = exp(r / 2^9)^(2^9)
        let s = r.ldexp(-9);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..=24 {
            term = term * s / Dd::new(n as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        for _ in 0..9 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    pub fn ln(self) -> Dd {
        // one Newton step on exp(y) = x from the f64 estimate
        let y = Dd::new(self.hi.ln());
        y + self * (-y).exp() - Dd::ONE
    }

    pub fn tanh(self) -> Dd {
        if self.hi < 0.0 {
            return -(-self).tanh();
        }
        let e = (self.ldexp(1).neg()).exp();
        (Dd::ONE - e) / (Dd::ONE + e)
    }

    pub fn sigmoid(self) -> Dd {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }

    pub fn relu(self) -> Dd {
        if self.hi > 0.0 || (self.hi == 0.0 && self.lo > 0.0) {
            self
        } else {
            Dd::ZERO
        }
    }

    fn activate(self, a: Activation) -> Dd {
        match a {
            Activation::None | Activation::Softmax => self,
            Activation::Relu => self.relu(),
            Activation::Tanh => self.tanh(),
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

/// Row-major matrix of double-doubles.
struct DdSeq {
    rows: usize,
    cols: usize,
    data: Vec<Dd>,
}

impl DdSeq {
    fn row(&self, t: usize) -> &[Dd] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }
}

fn lift(t: &Tensor) -> Vec<Dd> {
    t.data().iter().map(|&v| Dd::new(v)).collect()
}

fn affine(x: &[Dd], w: &[Dd], b: &[Dd], col: usize, width: usize) -> Dd {
    let mut s = b[col];
    for (i, &xi) in x.iter().enumerate() {
        s = s + xi * w[i * width + col];
    }
    s
}

fn recur(h: &[Dd], u: &[Dd], col: usize, width: usize) -> Dd {
    let mut s = Dd::ZERO;
    for (m, &hm) in h.iter().enumerate() {
        s = s + hm * u[m * width + col];
    }
    s
}

/// Per-layer parameters lifted to double-double. One tensor (the probed one)
/// may carry an exact `±step` offset.
struct DdParams {
    layers: Vec<Vec<Vec<Dd>>>,
}

fn forward_logits(spec: &ModelSpec, p: &DdParams, x: &Tensor) -> Vec<Dd> {
    let mut seq = DdSeq {
        rows: x.shape()[0],
        cols: x.shape()[1],
        data: lift(x),
    };
    let mut flat: Option<Vec<Dd>> = None;
    let last = spec.layers.len() - 1;
    for (li, layer) in spec.layers.iter().enumerate() {
        let lp = &p.layers[li];
        match *layer {
            LayerSpec::Flatten => {
                if flat.is_none() {
                    flat = Some(std::mem::take(&mut seq.data));
                }
            }
            LayerSpec::Dropout { .. } => {}
            LayerSpec::Dense { units, activation } => {
                let input = flat.take().expect("dense follows a flat shape");
                let act = if li == last { Activation::None } else { activation };
                flat = Some(
                    (0..units)
                        .map(|o| affine(&input, &lp[0], &lp[1], o, units).activate(act))
                        .collect(),
                );
            }
            LayerSpec::Conv1d {
                filters,
                kernel,
                activation,
            } => {
                let out_len = seq.rows - kernel + 1;
                let mut data = Vec::with_capacity(out_len * filters);
                for t in 0..out_len {
                    for o in 0..filters {
                        let mut s = lp[1][o];
                        for j in 0..kernel {
                            for i in 0..seq.cols {
                                s = s + lp[0][(o * kernel + j) * seq.cols + i] * seq.data[(t + j) * seq.cols + i];
                            }
                        }
                        data.push(s.activate(activation));
                    }
                }
                seq = DdSeq {
                    rows: out_len,
                    cols: filters,
                    data,
                };
            }
            LayerSpec::MaxPool1d { pool } => {
                let out_len = seq.rows / pool;
                let mut data = Vec::with_capacity(out_len * seq.cols);
                for t in 0..out_len {
                    for c in 0..seq.cols {
                        let mut best = seq.data[t * pool * seq.cols + c];
                        for j in 1..pool {
                            let v = seq.data[(t * pool + j) * seq.cols + c];
                            if v > best {
                                best = v;
                            }
                        }
                        data.push(best);
                    }
                }
                seq = DdSeq {
                    rows: out_len,
                    cols: seq.cols,
                    data,
                };
            }
            LayerSpec::GlobalMaxPool1d => {
                let out = (0..seq.cols)
                    .map(|c| {
                        (1..seq.rows).fold(seq.data[c], |best, t| {
                            let v = seq.data[t * seq.cols + c];
                            if v > best {
                                v
                            } else {
                                best
                            }
                        })
                    })
                    .collect();
                flat = Some(out);
            }
            LayerSpec::SimpleRnn {
                units,
                activation,
                return_sequences,
            } => {
                let mut h = vec![Dd::ZERO; units];
                let mut all = Vec::with_capacity(seq.rows * units);
                for t in 0..seq.rows {
                    let xt = seq.row(t);
                    h = (0..units)
                        .map(|j| {
                            (affine(xt, &lp[0], &lp[2], j, units) + recur(&h, &lp[1], j, units)).activate(activation)
                        })
                        .collect();
                    all.extend_from_slice(&h);
                }
                emit(&mut seq, &mut flat, all, h, units, return_sequences);
            }
            LayerSpec::Lstm {
                units,
                activation,
                return_sequences,
            } => {
                let w4 = 4 * units;
                let mut h = vec![Dd::ZERO; units];
                let mut c = vec![Dd::ZERO; units];
                let mut all = Vec::with_capacity(seq.rows * units);
                for t in 0..seq.rows {
                    let xt = seq.row(t);
                    let pre = |col: usize, h: &[Dd]| affine(xt, &lp[0], &lp[2], col, w4) + recur(h, &lp[1], col, w4);
                    let mut nh = vec![Dd::ZERO; units];
                    for j in 0..units {
                        let i_g = pre(j, &h).sigmoid();
                        let f_g = pre(units + j, &h).sigmoid();
                        let g_g = pre(2 * units + j, &h).activate(activation);
                        let o_g = pre(3 * units + j, &h).sigmoid();
                        c[j] = f_g * c[j] + i_g * g_g;
                        nh[j] = o_g * c[j].activate(activation);
                    }
                    h = nh;
                    all.extend_from_slice(&h);
                }
                emit(&mut seq, &mut flat, all, h, units, return_sequences);
            }
            LayerSpec::Gru {
                units,
                activation,
                return_sequences,
            } => {
                let w3 = 3 * units;
                let mut h = vec![Dd::ZERO; units];
                let mut all = Vec::with_capacity(seq.rows * units);
                for t in 0..seq.rows {
                    let xt = seq.row(t);
                    let xs = |col: usize| affine(xt, &lp[0], &lp[2], col, w3);
                    let hs = |col: usize, h: &[Dd]| lp[3][col] + recur(h, &lp[1], col, w3);
                    let mut nh = vec![Dd::ZERO; units];
                    for j in 0..units {
                        let z = (xs(j) + hs(j, &h)).sigmoid();
                        let r = (xs(units + j) + hs(units + j, &h)).sigmoid();
                        let cand = (xs(2 * units + j) + r * hs(2 * units + j, &h)).activate(activation);
                        nh[j] = z * h[j] + (Dd::ONE - z) * cand;
                    }
                    h = nh;
                    all.extend_from_slice(&h);
                }
                emit(&mut seq, &mut flat, all, h, units, return_sequences);
            }
        }
    }
    flat.expect("model ends in a dense layer")
}

fn emit(
    seq: &mut DdSeq,
    flat: &mut Option<Vec<Dd>>,
    all: Vec<Dd>,
    last: Vec<Dd>,
    units: usize,
    return_sequences: bool,
) {
    if return_sequences {
        *seq = DdSeq {
            rows: all.len() / units,
            cols: units,
            data: all,
        };
    } else {
        *flat = Some(last);
    }
}

/// Evaluates eval-mode cross-entropy in double-double for a series of single
/// scalar perturbations of one parameter bundle.
pub(crate) struct ExtendedLoss<'a> {
    spec: &'a ModelSpec,
    x: &'a Tensor,
    class: usize,
    params: DdParams,
}

impl<'a> ExtendedLoss<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, params: &ParameterBundle, x: &'a Tensor, class: usize) -> Result<Self> {
        params.check_matches(spec)?;
        let layers = params
            .layers
            .iter()
            .map(|l| l.tensors.iter().map(|nt| lift(&nt.tensor)).collect())
            .collect();
        Ok(Self {
            spec,
            x,
            class,
            params: DdParams { layers },
        })
    }

    fn loss(&self) -> Dd {
        let logits = forward_logits(self.spec, &self.params, self.x);
        let max = logits.iter().copied().fold(logits[0], |m, v| if v > m { v } else { m });
        let mut sum = Dd::ZERO;
        for &z in &logits {
            sum = sum + (z - max).exp();
        }
        max + sum.ln() - logits[self.class]
    }

    /// Central difference `(L(θ+h) − L(θ−h)) / 2h` for one scalar parameter.
    pub(crate) fn central_difference(&mut self, layer: usize, tensor: usize, index: usize, step: f64) -> f64 {
        let original = self.params.layers[layer][tensor][index];
        self.params.layers[layer][tensor][index] = original + Dd::new(step);
        let plus = self.loss();
        self.params.layers[layer][tensor][index] = original - Dd::new(step);
        let minus = self.loss();
        self.params.layers[layer][tensor][index] = original;
        ((plus - minus) / Dd::new(2.0 * step)).to_f64()
    }
}
