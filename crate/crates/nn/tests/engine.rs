use rand::{Rng, SeedableRng};
use xemo_nn::{
    grad_check, mse, mse_grad, Checkpoint, GradCheckConfig, LayerSpec, Mode, NnError, NnRng, Sequential, Tensor,
};

fn rng(seed: u64) -> NnRng {
    NnRng::seed_from_u64(seed)
}

fn random_tensor(shape: &[usize], rng: &mut NnRng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn identity_kernel_conv_reproduces_input() {
    let mut net = Sequential::<f64>::new(&[LayerSpec::conv3x3(1, 1)], &mut rng(1)).unwrap();
    {
        let mut p = net.params_mut();
        p[0].data_mut().fill(0.0);
        p[0].data_mut()[4] = 1.0;
        p[1].data_mut().fill(0.0);
    }
    let x = random_tensor(&[2, 1, 5, 7], &mut rng(2));
    let (y, _) = net.forward(&x, Mode::Eval, None).unwrap();
    assert_eq!(y, x);
}

#[test]
fn adaptive_pool_of_constant_map() {
    let net = Sequential::<f64>::new(&[LayerSpec::AdaptiveAvgPool], &mut rng(0)).unwrap();
    let x = Tensor::full(&[1, 3, 4, 6], 0.37);
    let y = net.predict(&x).unwrap();
    assert_eq!(y.shape(), &[1, 3]);
    for v in y.data() {
        assert!((v - 0.37).abs() < 1e-15);
    }
}

#[test]
fn zero_weight_dense_outputs_bias() {
    let mut net = Sequential::<f64>::new(&[LayerSpec::dense(4, 3)], &mut rng(0)).unwrap();
    {
        let mut p = net.params_mut();
        p[0].data_mut().fill(0.0);
        p[1].data_mut().copy_from_slice(&[0.1, -0.2, 0.3]);
    }
    let y = net.predict(&random_tensor(&[5, 4], &mut rng(3))).unwrap();
    for row in y.data().chunks(3) {
        assert_eq!(row, &[0.1, -0.2, 0.3]);
    }
}

#[test]
fn batch_norm_train_output_is_standardized() {
    let net = Sequential::<f64>::new(&[LayerSpec::batch_norm(3)], &mut rng(0)).unwrap();
    let x = random_tensor(&[4, 3, 5, 5], &mut rng(4)).map(|v| 3.0 * v + 1.5);
    let (y, _) = net.forward(&x, Mode::Train, None).unwrap();
    for ch in 0..3 {
        let vals: Vec<f64> =
            (0..4).flat_map(|b| y.data()[(b * 3 + ch) * 25..][..25].to_vec()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 1e-6, "mean {mean}");
        // eps = 1e-5 shrinks the variance by var/(var+eps)
        assert!((var - 1.0).abs() < 1e-4, "var {var}");
    }
}

#[test]
fn batch_norm_zero_eps_variance_is_exactly_one() {
    let spec = LayerSpec::BatchNorm { channels: 2, momentum: 0.1, eps: 1e-14 };
    let net = Sequential::<f64>::new(&[spec], &mut rng(0)).unwrap();
    let x = random_tensor(&[6, 2], &mut rng(5));
    let (y, _) = net.forward(&x, Mode::Train, None).unwrap();
    for ch in 0..2 {
        let vals: Vec<f64> = y.data().iter().skip(ch).step_by(2).copied().collect();
        let mean = vals.iter().sum::<f64>() / 6.0;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-6 && (var - 1.0).abs() < 1e-6);
    }
}

#[test]
fn running_stats_drive_eval_mode() {
    let mut net = Sequential::<f64>::new(&[LayerSpec::batch_norm(1)], &mut rng(0)).unwrap();
    let x = Tensor::from_vec(&[4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let before = net.predict(&x).unwrap();
    assert_eq!(before.data(), x.map(|v| v / (1.0f64 + 1e-5).sqrt()).data());
    let (_, tape) = net.forward(&x, Mode::Train, None).unwrap();
    net.update_running_stats(&tape);
    let rm = net.buffers()[0].data()[0];
    let rv = net.buffers()[1].data()[0];
    assert!((rm - 0.25).abs() < 1e-12);
    // unbiased variance of 1..4 is 5/3
    assert!((rv - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
}

#[test]
fn eval_forward_is_pure_and_deterministic() {
    let specs = [
        LayerSpec::conv3x3(1, 2),
        LayerSpec::batch_norm(2),
        LayerSpec::Relu,
        LayerSpec::AdaptiveAvgPool,
        LayerSpec::dropout(0.5),
        LayerSpec::dense(2, 1),
    ];
    let net = Sequential::<f32>::new(&specs, &mut rng(7)).unwrap();
    let x = random_tensor(&[3, 1, 6, 6], &mut rng(8)).cast::<f32>();
    let snapshot = net.clone();
    let a = net.predict(&x).unwrap();
    let b = net.forward(&x, Mode::Eval, None).unwrap().0;
    assert_eq!(a, b);
    assert_eq!(net, snapshot);
}

#[test]
fn train_dropout_requires_rng() {
    let net = Sequential::<f64>::new(&[LayerSpec::dropout(0.3)], &mut rng(0)).unwrap();
    let x = Tensor::full(&[2, 4], 1.0);
    assert!(matches!(net.forward(&x, Mode::Train, None), Err(NnError::Config(_))));
    let (y, _) = net.forward(&x, Mode::Train, Some(&mut rng(1))).unwrap();
    for &v in y.data() {
        assert!(v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-12);
    }
}

#[test]
fn shape_mismatch_names_the_layer() {
    let net = Sequential::<f64>::new(&[LayerSpec::dense(3, 2), LayerSpec::Relu], &mut rng(0)).unwrap();
    let err = net.predict(&Tensor::zeros(&[1, 4])).unwrap_err();
    match err {
        NnError::Dimension { layer, .. } => assert!(layer.contains("layer 0 (dense)"), "{layer}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn inconsistent_chain_is_rejected() {
    let err = Sequential::<f32>::new(
        &[LayerSpec::conv3x3(1, 4), LayerSpec::AdaptiveAvgPool, LayerSpec::dense(5, 2)],
        &mut rng(0),
    )
    .unwrap_err();
    assert!(matches!(err, NnError::Dimension { .. }));
    assert!(Sequential::<f32>::new(&[LayerSpec::dropout(1.0)], &mut rng(0)).is_err());
}

#[test]
fn single_unit_dense_gradient_matches_hand_derivation() {
    // L = (w.x + b - t)^2  =>  dL/dw = 2 x (w.x + b - t), dL/db = 2 (w.x + b - t)
    let mut net = Sequential::<f64>::new(&[LayerSpec::dense(2, 1)], &mut rng(0)).unwrap();
    {
        let mut p = net.params_mut();
        p[0].data_mut().copy_from_slice(&[0.5, -1.5]);
        p[1].data_mut()[0] = 0.25;
    }
    let x = Tensor::from_vec(&[1, 2], vec![2.0, 3.0]).unwrap();
    let t = Tensor::from_vec(&[1, 1], vec![1.0]).unwrap();
    let (y, tape) = net.forward(&x, Mode::Train, None).unwrap();
    let residual = 0.5 * 2.0 - 1.5 * 3.0 + 0.25 - 1.0;
    assert!((y.data()[0] - 1.0 - residual).abs() < 1e-15);
    let (g, dx) = net.backward(&tape, &mse_grad(&y, &t).unwrap()).unwrap();
    assert_eq!(g[0].data(), &[2.0 * 2.0 * residual, 2.0 * 3.0 * residual]);
    assert_eq!(g[1].data(), &[2.0 * residual]);
    assert_eq!(dx.data(), &[2.0 * 0.5 * residual, 2.0 * -1.5 * residual]);
}

#[test]
fn zero_output_gradient_gives_zero_parameter_gradients() {
    let specs = [
        LayerSpec::conv3x3(2, 3),
        LayerSpec::batch_norm(3),
        LayerSpec::Relu,
        LayerSpec::max_pool(2),
        LayerSpec::AdaptiveAvgPool,
        LayerSpec::dense(3, 2),
    ];
    let net = Sequential::<f64>::new(&specs, &mut rng(11)).unwrap();
    let x = random_tensor(&[2, 2, 6, 5], &mut rng(12));
    let (y, tape) = net.forward(&x, Mode::Train, None).unwrap();
    let (g, dx) = net.backward(&tape, &Tensor::zeros(y.shape())).unwrap();
    assert!(g.iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
    assert!(dx.data().iter().all(|&v| v == 0.0));
    assert!(matches!(
        net.backward(&tape, &Tensor::zeros(&[2, 3])),
        Err(NnError::Dimension { .. })
    ));
}

#[test]
fn linear_network_grad_check() {
    let net = Sequential::<f64>::new(&[LayerSpec::dense(2, 1)], &mut rng(3)).unwrap();
    let x = random_tensor(&[4, 2], &mut rng(4));
    let t = random_tensor(&[4, 1], &mut rng(5));
    let report = grad_check(&net, &x, &t, &GradCheckConfig::default()).unwrap();
    assert!(report.max_rel_error < 1e-6, "{report:?}");
    assert_eq!(report.skipped, 0);
}

#[test]
fn conv_bn_relu_pool_dense_grad_check() {
    let specs = [
        LayerSpec::conv3x3(1, 4),
        LayerSpec::batch_norm(4),
        LayerSpec::Relu,
        LayerSpec::max_pool(2),
        LayerSpec::AdaptiveAvgPool,
        LayerSpec::dense(4, 2),
    ];
    let net = Sequential::<f64>::new(&specs, &mut rng(21)).unwrap();
    let x = random_tensor(&[3, 1, 6, 6], &mut rng(22));
    let t = random_tensor(&[3, 2], &mut rng(23));
    let report = grad_check(&net, &x, &t, &GradCheckConfig::default()).unwrap();
    assert!(report.passed(), "{:?}", report.failures());
    assert!(report.max_rel_error < 1e-4);
    assert!(report.checked > report.skipped * 10);
}

#[test]
fn relu_away_from_kink_passes() {
    // every pre-activation is at least 1e-3 away from zero
    let mut net = Sequential::<f64>::new(&[LayerSpec::dense(3, 4), LayerSpec::Relu, LayerSpec::dense(4, 1)], &mut rng(9))
        .unwrap();
    net.params_mut()[1].data_mut().copy_from_slice(&[0.5, -0.5, 0.4, -0.4]);
    let x = random_tensor(&[5, 3], &mut rng(10)).map(|v| v * 0.01);
    let (y, _) = Sequential::<f64>::new(&[LayerSpec::dense(3, 4)], &mut rng(9))
        .and_then(|mut first| {
            first.params_mut()[1].data_mut().copy_from_slice(&[0.5, -0.5, 0.4, -0.4]);
            first.forward(&x, Mode::Eval, None)
        })
        .unwrap();
    assert!(y.data().iter().all(|v| v.abs() > 1e-3));
    let t = random_tensor(&[5, 1], &mut rng(11));
    let report = grad_check(&net, &x, &t, &GradCheckConfig::default()).unwrap();
    assert_eq!(report.skipped, 0);
    assert!(report.passed(), "{report:?}");
}

#[test]
fn dropout_masks_are_reproducible_under_grad_check() {
    let specs = [LayerSpec::dense(5, 6), LayerSpec::dropout(0.4), LayerSpec::dense(6, 2)];
    let net = Sequential::<f64>::new(&specs, &mut rng(31)).unwrap();
    let x = random_tensor(&[3, 5], &mut rng(32));
    let t = random_tensor(&[3, 2], &mut rng(33));
    let report = grad_check(&net, &x, &t, &GradCheckConfig { seed: 77, ..Default::default() }).unwrap();
    assert!(report.passed(), "{report:?}");
}

#[test]
fn mse_value_matches_formula() {
    let p = Tensor::from_vec(&[2], vec![0.0f64, 0.0]).unwrap();
    let t = Tensor::from_vec(&[2], vec![1.0, 3.0]).unwrap();
    assert_eq!(mse(&p, &t).unwrap(), 5.0);
}

#[test]
fn checkpoint_round_trip() {
    let specs = [LayerSpec::conv3x3(1, 2), LayerSpec::batch_norm(2), LayerSpec::AdaptiveAvgPool, LayerSpec::dense(2, 3)];
    let net = Sequential::<f32>::new(&specs, &mut rng(41)).unwrap();
    let adam = xemo_nn::AdamState::new(Default::default(), &net.params()).unwrap();
    let ck = Checkpoint {
        descriptor: serde_json::to_string(&specs).unwrap(),
        params: net.params().into_iter().cloned().collect(),
        buffers: net.buffers().into_iter().cloned().collect(),
        adam: Some(adam),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);
    let specs2: Vec<LayerSpec> = serde_json::from_str(&back.descriptor).unwrap();
    let net2 = Sequential::from_state(&specs2, back.params, back.buffers).unwrap();
    assert_eq!(net2, net);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'Z';
    assert!(Checkpoint::read_from(&mut bytes.as_slice()).is_err());
}
