//! Parameter counts, reconstruction identities, and the architecture solver.

use harbench::nn::{model_forward, Activation, LayerSpec, Mode, ParameterBundle};
use harbench::rng;
use harbench::zoo::*;
use harbench::Tensor;

fn count(name: ModelName) -> usize {
    build_model(name).param_count().unwrap()
}

#[test]
fn published_totals() {
    let want = [
        (ModelName::ShallowNn, 4_804),
        (ModelName::Dl, 39_620),
        (ModelName::Rnn, 7_652),
        (ModelName::Lstm, 6_884),
        (ModelName::Gru, 14_500),
        (ModelName::Cnn, 51_308),
        (ModelName::CnnRnn, 14_836),
        (ModelName::CnnGru, 23_348),
        (ModelName::CnnLstm, 27_316),
    ];
    for (name, n) in want {
        assert_eq!(count(name), n, "{name}");
        let spec = build_model(name);
        assert_eq!(
            ParameterBundle::zeros(&spec).unwrap().scalar_count(),
            n,
            "{name} allocation"
        );
    }
}

fn trainable_counts(name: ModelName) -> Vec<usize> {
    let spec = build_model(name);
    spec.layer_param_counts()
        .unwrap()
        .into_iter()
        .zip(&spec.layers)
        .filter(|(_, l)| l.is_trainable())
        .map(|(c, _)| c)
        .collect()
}

#[test]
fn per_layer_decompositions() {
    assert_eq!(trainable_counts(ModelName::Rnn), [1_248, 2_080, 2_112, 2_080, 132]);
    assert_eq!(trainable_counts(ModelName::Gru), [3_840, 6_336, 2_112, 2_080, 132]);
    assert_eq!(trainable_counts(ModelName::Lstm)[0], 1_472);
    let gru = trainable_counts(ModelName::CnnGru);
    assert_eq!(gru[0] + gru[1], 7_376);
    assert_eq!(gru[2] + gru[3] + gru[4], 3 * 32 * 90 + 3 * 16 * 50 + 3 * 16 * 34);
    assert_eq!(gru[2] + gru[3] + gru[4], 12_672);
    assert_eq!(gru[5] + gru[6] + gru[7], 3_300);
}

#[test]
fn layer_widths() {
    let units: Vec<usize> = build_model(ModelName::Lstm)
        .layers
        .iter()
        .filter_map(|l| match *l {
            LayerSpec::Lstm { units, .. } | LayerSpec::Dense { units, .. } => Some(units),
            _ => None,
        })
        .collect();
    assert_eq!(units, [16, 16, 64, 32, 4]);
}

#[test]
fn reconstruction_identities() {
    let rnn = count(ModelName::CnnRnn);
    let lstm = count(ModelName::CnnLstm);
    let gru = count(ModelName::CnnGru);
    let recurrent_sum: usize = trainable_counts(ModelName::CnnRnn)[2..5].iter().sum();
    assert_eq!(recurrent_sum, 4_160);
    assert_eq!(lstm - rnn, 3 * recurrent_sum);
    assert_eq!(lstm - rnn, 12_480);
    assert_eq!(gru - rnn, 2 * recurrent_sum + 3 * (32 + 16 + 16));
    assert_eq!(gru - rnn, 8_512);
}

#[test]
fn recurrent_count_ratios() {
    for (n_in, u) in [(6, 32), (56, 16), (1, 1), (13, 7)] {
        let cnt = |l: LayerSpec| l.param_count_for(n_in);
        let simple = cnt(LayerSpec::SimpleRnn {
            units: u,
            activation: Activation::Tanh,
            return_sequences: false,
        });
        let lstm = cnt(LayerSpec::Lstm {
            units: u,
            activation: Activation::Tanh,
            return_sequences: false,
        });
        let gru = cnt(LayerSpec::Gru {
            units: u,
            activation: Activation::Tanh,
            return_sequences: false,
        });
        assert_eq!(lstm, 4 * simple);
        assert_eq!(gru, 3 * simple + 3 * u);
    }
}

#[test]
fn every_model_outputs_a_distribution() {
    let mut r = rng::stream(5);
    let x = Tensor::new(
        vec![INPUT_LEN, INPUT_CHANNELS],
        (0..INPUT_LEN * INPUT_CHANNELS)
            .map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0)
            .collect(),
    )
    .unwrap();
    for name in ModelName::ALL {
        let spec = build_model(name);
        let params = ParameterBundle::glorot(&spec, &mut r).unwrap();
        let p = model_forward(&spec, &params, &x, Mode::Eval).unwrap();
        assert_eq!(p.shape(), [NUM_CLASSES]);
        assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-12, "{name}");
        assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn dropout_after_hidden_layers_only() {
    for name in ModelName::ALL {
        let spec = build_model(name);
        let n = spec.layers.len();
        assert!(!matches!(spec.layers[n - 2], LayerSpec::Dropout { .. }) || n > 2);
        for (i, l) in spec.layers.iter().enumerate() {
            if let LayerSpec::Dropout { rate } = l {
                assert_eq!(*rate, 0.3);
                assert!(spec.layers[i - 1].is_trainable(), "{name} layer {i}");
            } else if l.is_trainable() && i + 1 < n {
                assert!(
                    matches!(spec.layers[i + 1], LayerSpec::Dropout { .. }),
                    "{name} layer {i}"
                );
            }
        }
    }
    assert!(!build_model(ModelName::ShallowNn)
        .layers
        .iter()
        .any(|l| matches!(l, LayerSpec::Dropout { .. })));
}

#[test]
fn names_parse() {
    for name in ModelName::ALL {
        assert_eq!(name.as_str().parse::<ModelName>().unwrap(), name);
        assert_eq!(name.as_str().to_lowercase().parse::<ModelName>().unwrap(), name);
        let json = serde_json::to_string(&name).unwrap();
        assert_eq!(json, format!("\"{}\"", name.as_str()));
    }
    assert!(build_model_named("Transformer").is_err());
}

#[test]
fn verification_table_is_clean() {
    let rows = verify_param_counts();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.matches && !r.hard_failure), "{rows:#?}");
}

#[test]
fn corrupted_manifest_fails_hard() {
    let mut m = zoo_manifest();
    m.models[2].expected_params += 1;
    let rows = verify_manifest(&m);
    assert!(rows[2].hard_failure);
    assert_eq!(rows[2].delta, Some(-1));
    let mut m = zoo_manifest();
    m.models[5].expected_params += 10;
    let rows = verify_manifest(&m);
    assert!(
        !rows[5].matches && !rows[5].hard_failure,
        "searched rows only report a delta"
    );
}

#[test]
fn solver_first_match_is_the_canonical_cnn() {
    let space = CnnSearchSpace::standard();
    let res = solve_conv_architecture(51_308, &space, 5).unwrap();
    assert!(!res.exact.is_empty());
    let first = res.best().unwrap();
    assert_eq!(first.to_spec(&space, "CNN"), build_model(ModelName::Cnn));
    assert_eq!(first.describe(&space), "conv24k4 conv56k5 gmp d174 d190 out4");
}

#[test]
fn solver_matches_recount_independently() {
    let space = CnnSearchSpace::standard();
    let res = solve_conv_architecture(51_308, &space, 5).unwrap();
    // recount a spread of matches through the model-spec path
    let step = (res.exact.len() / 500).max(1);
    for c in res.exact.iter().step_by(step) {
        assert_eq!(
            c.to_spec(&space, "x").param_count().unwrap(),
            51_308,
            "{}",
            c.describe(&space)
        );
    }
    let keys: Vec<_> = res.exact.iter().map(|c| c.sort_key(&space)).collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    let again = solve_conv_architecture(51_308, &space, 5).unwrap();
    assert_eq!(res, again);
}

#[test]
fn solver_agrees_with_brute_force_on_a_small_space() {
    let space = CnnSearchSpace {
        pools: vec![1, 3],
        extra_conv: Some(ExtraConv {
            max_filters: 6,
            max_kernel: 3,
            activation: Activation::Relu,
        }),
        min_hidden: 0,
        max_hidden: 2,
        max_width: 12,
        ..CnnSearchSpace::standard()
    };
    // walk every configuration explicitly
    let mut all = Vec::new();
    let extras: Vec<Option<(usize, usize)>> = std::iter::once(None)
        .chain((1..=6).flat_map(|f| (1..=3).map(move |k| Some((f, k)))))
        .collect();
    let mut hiddens = vec![vec![]];
    for a in 1..=12 {
        hiddens.push(vec![a]);
        for b in 1..=12 {
            hiddens.push(vec![a, b]);
        }
    }
    for p1 in [1, 3] {
        for p2 in [1, 3] {
            for &extra in &extras {
                let p3s: Vec<usize> = if extra.is_some() { vec![1, 3] } else { vec![] };
                let pool_sets: Vec<Vec<usize>> = if p3s.is_empty() {
                    vec![vec![p1, p2]]
                } else {
                    p3s.iter().map(|&p3| vec![p1, p2, p3]).collect()
                };
                for pools in pool_sets {
                    for head in 0..2 {
                        for hidden in &hiddens {
                            let c = CnnCandidate {
                                pools: pools.clone(),
                                extra_conv: extra,
                                head,
                                hidden: hidden.clone(),
                                params: 0,
                                delta: 0,
                            };
                            if let Ok(n) = c.to_spec(&space, "x").param_count() {
                                all.push((n, c));
                            }
                        }
                    }
                }
            }
        }
    }
    let targets: Vec<usize> = all
        .iter()
        .step_by(97)
        .map(|(n, _)| *n)
        .chain([3, 7_376 + 56 * 4 + 4])
        .collect();
    for target in targets {
        let mut want: Vec<CnnCandidate> = all
            .iter()
            .filter(|(n, _)| *n == target)
            .map(|(_, c)| CnnCandidate {
                params: target,
                ..c.clone()
            })
            .collect();
        want.sort_by_key(|c| c.sort_key(&space));
        let got = solve_conv_architecture(target, &space, 3).unwrap();
        assert_eq!(got.exact, want, "target {target}");
        if want.is_empty() {
            let best = all
                .iter()
                .map(|(n, _)| (*n as i64 - target as i64).unsigned_abs())
                .min()
                .unwrap();
            assert_eq!(got.nearest[0].delta.unsigned_abs(), best);
        }
    }
}

#[test]
fn hybrid_family_contains_canonical_hybrid() {
    let rec = |units, rs| LayerSpec::SimpleRnn {
        units,
        activation: Activation::Tanh,
        return_sequences: rs,
    };
    let space = CnnSearchSpace::hybrid(vec![rec(32, true), rec(16, true), rec(16, false)]);
    let res = solve_conv_architecture(14_836, &space, 5).unwrap();
    let canonical = build_model(ModelName::CnnRnn);
    assert!(res.exact.iter().any(|c| c.to_spec(&space, "CNN_RNN") == canonical));
}

#[test]
fn shallow_family() {
    let res = solve_conv_architecture(4_804, &CnnSearchSpace::dense_only(0, 1), 3).unwrap();
    assert_eq!(res.exact.len(), 1);
    assert!(res.exact[0].hidden.is_empty());
    assert_eq!(
        res.exact[0].to_spec(&CnnSearchSpace::dense_only(0, 1), "Shallow_NN"),
        build_model(ModelName::ShallowNn)
    );

    let one_hidden = CnnSearchSpace::dense_only(1, 1);
    let res = solve_conv_architecture(4_804, &one_hidden, 3).unwrap();
    assert!(res.exact.is_empty());
    assert_eq!(res.nearest[0].hidden, [4]);
    assert_eq!(res.nearest[0].delta, 20);
}

#[test]
fn impossible_target_and_empty_space() {
    let res = solve_conv_architecture(3, &CnnSearchSpace::standard(), 2).unwrap();
    assert!(res.exact.is_empty());
    assert_eq!(res.nearest.len(), 2);
    let empty = CnnSearchSpace {
        heads: vec![],
        ..CnnSearchSpace::standard()
    };
    assert!(solve_conv_architecture(100, &empty, 2).is_err());
}

#[test]
fn nearest_exists_when_target_is_below_every_feature_stage() {
    let gru = |units, rs| LayerSpec::Gru {
        units,
        activation: Activation::Tanh,
        return_sequences: rs,
    };
    let space = CnnSearchSpace::hybrid(vec![gru(32, true), gru(16, true), gru(16, false)]);
    let res = solve_conv_architecture(14_836, &space, 3).unwrap();
    assert!(res.exact.is_empty());
    assert_eq!(res.nearest.len(), 3);
    assert!(res.nearest.iter().all(|c| c.delta > 0));
    assert!(res.nearest.windows(2).all(|p| p[0].delta <= p[1].delta));
}
