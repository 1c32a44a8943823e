//! Forward kernels against naive-loop references on random instances.

mod common;

use common::*;
use harbench::nn::{
    conv1d_forward, dense_forward, gru_forward, lstm_forward, maxpool1d_forward, simple_rnn_forward, Activation,
};
use harbench::Tensor;
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![Just(Activation::None), Just(Activation::Relu), Just(Activation::Tanh)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dense_matches_direct_summation(seed in any::<u64>(), n in 1usize..9, n_in in 1usize..12, n_out in 1usize..9, a in activation()) {
        let mut r = rng(seed);
        let x = random_mat(&mut r, n, n_in, 2.0);
        let w = random_mat(&mut r, n_in, n_out, 1.0);
        let b = random_vec(&mut r, n_out, 1.0);
        let got = dense_forward(&to_tensor(&x), &to_tensor(&w), &Tensor::vector(b.clone()), a).unwrap();
        prop_assert!(max_abs_diff(got.data(), &flat(&dense(&x, &w, &b, a))) < TOL);
    }

    #[test]
    fn conv_matches_triple_loop(seed in any::<u64>(), len in 1usize..40, c_in in 1usize..7, c_out in 1usize..9, k in 1usize..8, a in activation()) {
        prop_assume!(len >= k);
        let mut r = rng(seed);
        let x = random_mat(&mut r, len, c_in, 2.0);
        let w: Vec<Mat> = (0..c_out).map(|_| random_mat(&mut r, k, c_in, 1.0)).collect();
        let b = random_vec(&mut r, c_out, 1.0);
        let wt = Tensor::new(vec![c_out, k, c_in], w.iter().flat_map(|m| m.iter().flatten().copied()).collect()).unwrap();
        let got = conv1d_forward(&to_tensor(&x), &wt, &Tensor::vector(b.clone()), a).unwrap();
        prop_assert_eq!(got.shape(), &[len - k + 1, c_out]);
        prop_assert!(max_abs_diff(got.data(), &flat(&conv(&x, &w, &b, a))) < TOL);
    }

    #[test]
    fn maxpool_matches_enumeration(seed in any::<u64>(), len in 1usize..30, c in 1usize..5, pool in 1usize..6) {
        prop_assume!(pool <= len);
        let mut r = rng(seed);
        let x = random_mat(&mut r, len, c, 3.0);
        let got = maxpool1d_forward(&to_tensor(&x), pool).unwrap();
        let want = flat(&maxpool(&x, pool));
        prop_assert_eq!(got.data(), want.as_slice());
    }

    #[test]
    fn simple_rnn_matches_unrolled_loop(seed in any::<u64>(), len in 1usize..15, c_in in 1usize..6, units in 1usize..7, a in activation(), seq in any::<bool>()) {
        let mut r = rng(seed);
        let x = random_mat(&mut r, len, c_in, 1.5);
        let w = random_mat(&mut r, c_in, units, 0.8);
        let u = random_mat(&mut r, units, units, 0.5);
        let b = random_vec(&mut r, units, 0.5);
        let got = simple_rnn_forward(&to_tensor(&x), &to_tensor(&w), &to_tensor(&u), &Tensor::vector(b.clone()), a, seq).unwrap();
        let want = rnn(&x, &w, &u, &b, a);
        let want = if seq { flat(&want) } else { want[len - 1].clone() };
        prop_assert!(max_abs_diff(got.data(), &want) < TOL);
    }

    #[test]
    fn lstm_matches_unrolled_loop(seed in any::<u64>(), len in 1usize..15, c_in in 1usize..7, units in 1usize..6, seq in any::<bool>()) {
        let mut r = rng(seed);
        let x = random_mat(&mut r, len, c_in, 1.5);
        let w = random_mat(&mut r, c_in, 4 * units, 0.8);
        let u = random_mat(&mut r, units, 4 * units, 0.5);
        let b = random_vec(&mut r, 4 * units, 0.5);
        let got = lstm_forward(&to_tensor(&x), &to_tensor(&w), &to_tensor(&u), &Tensor::vector(b.clone()), Activation::Tanh, seq).unwrap();
        let want = lstm(&x, &w, &u, &b, Activation::Tanh);
        let want = if seq { flat(&want) } else { want[len - 1].clone() };
        prop_assert!(max_abs_diff(got.data(), &want) < TOL);
    }

    #[test]
    fn gru_matches_unrolled_loop(seed in any::<u64>(), len in 1usize..15, c_in in 1usize..7, units in 1usize..6, seq in any::<bool>()) {
        let mut r = rng(seed);
        let x = random_mat(&mut r, len, c_in, 1.5);
        let w = random_mat(&mut r, c_in, 3 * units, 0.8);
        let u = random_mat(&mut r, units, 3 * units, 0.5);
        let bi = random_vec(&mut r, 3 * units, 0.5);
        let br = random_vec(&mut r, 3 * units, 0.5);
        let got = gru_forward(&to_tensor(&x), &to_tensor(&w), &to_tensor(&u), &Tensor::vector(bi.clone()), &Tensor::vector(br.clone()), Activation::Tanh, seq).unwrap();
        let want = gru(&x, &w, &u, &bi, &br, Activation::Tanh);
        let want = if seq { flat(&want) } else { want[len - 1].clone() };
        prop_assert!(max_abs_diff(got.data(), &want) < TOL);
    }
}

#[test]
fn randomly_sized_instances_of_every_kind() {
    for kind in OracleKind::ALL {
        for seed in 0..100 {
            let d = oracle_max_diff(kind, seed);
            assert!(d < TOL, "{kind:?} seed {seed}: {d:e}");
        }
    }
}

#[test]
fn fixed_size_instances_from_the_layer_contracts() {
    let mut r = rng(11);
    // dense: 8×5 batch
    let x = random_mat(&mut r, 8, 5, 1.0);
    let w = random_mat(&mut r, 5, 4, 1.0);
    let b = random_vec(&mut r, 4, 1.0);
    let got = dense_forward(
        &to_tensor(&x),
        &to_tensor(&w),
        &Tensor::vector(b.clone()),
        Activation::Relu,
    )
    .unwrap();
    assert!(max_abs_diff(got.data(), &flat(&dense(&x, &w, &b, Activation::Relu))) < TOL);

    // conv: x 50×6, W 8×5×6
    let x = random_mat(&mut r, 50, 6, 1.0);
    let w: Vec<Mat> = (0..8).map(|_| random_mat(&mut r, 5, 6, 1.0)).collect();
    let b = random_vec(&mut r, 8, 1.0);
    let wt = Tensor::new(
        vec![8, 5, 6],
        w.iter().flat_map(|m| m.iter().flatten().copied()).collect(),
    )
    .unwrap();
    let got = conv1d_forward(&to_tensor(&x), &wt, &Tensor::vector(b.clone()), Activation::None).unwrap();
    assert_eq!(got.shape(), &[46, 8]);
    assert!(max_abs_diff(got.data(), &flat(&conv(&x, &w, &b, Activation::None))) < TOL);

    // simple RNN: 10 steps
    let x = random_mat(&mut r, 10, 6, 1.0);
    let w = random_mat(&mut r, 6, 4, 1.0);
    let u = random_mat(&mut r, 4, 4, 0.5);
    let b = random_vec(&mut r, 4, 0.5);
    let got = simple_rnn_forward(
        &to_tensor(&x),
        &to_tensor(&w),
        &to_tensor(&u),
        &Tensor::vector(b.clone()),
        Activation::Tanh,
        true,
    )
    .unwrap();
    assert!(max_abs_diff(got.data(), &flat(&rnn(&x, &w, &u, &b, Activation::Tanh))) < TOL);
}
