mod support;

use optlab_nn::grad_check::grad_check;
use optlab_nn::layers::{Activation, KanFamily};
use optlab_nn::model::LayerSpec;
use optlab_nn::{Model, ModelSpec, Standardizer};
use support::*;

#[test]
fn every_layer_passes_grad_check() {
    for (layer, err) in layer_gradient_suite() {
        assert!(err < 1e-5, "{layer}: {err:e}");
    }
}

#[test]
fn linear_map_is_exact() {
    let w = random_tensor(&mut rng(1), &[4, 3], 1.0);
    let x = random_tensor(&mut rng(2), &[2, 4], 1.0);
    let err = grad_check(
        |tape, x| {
            let w = tape.constant(w.clone())?;
            let y = tape.matmul(x, w)?;
            tape.mean(y)
        },
        &x,
        1e-4,
    )
    .unwrap();
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn tanh_chain_depth_five() {
    let x = random_tensor(&mut rng(3), &[6], 1.5);
    let err = grad_check(
        |tape, mut x| {
            for _ in 0..5 {
                x = tape.tanh(x)?;
            }
            tape.mean(x)
        },
        &x,
        1e-4,
    )
    .unwrap();
    assert!(err < 1e-6, "{err:e}");
}

fn check_model(spec: ModelSpec, input_shape: &[usize], seed: u64) {
    let mut model = Model::new(spec, seed).unwrap();
    let mut r = rng(seed);
    let x = random_tensor(&mut r, input_shape, 1.0);
    let y: Vec<f64> = (0..input_shape[0]).map(|_| rand::Rng::random_range(&mut r, -1.0..1.0)).collect();
    model.set_standardizer(Standardizer::fit(&x)).unwrap();
    let err = model_gradient_error(&mut model, &x, &y);
    assert!(err < 1e-5, "{:?}: {err:e}", model.spec());
}

#[test]
fn whole_models_match_finite_differences() {
    check_model(ModelSpec::mlp(6, 2, Activation::Tanh), &[5, 10], 1);
    check_model(ModelSpec::kan(5, KanFamily::Legendre, &[2, 3], 0.0), &[4, 10], 2);
    let tdnn = ModelSpec {
        timesteps: Some(4),
        layers: vec![LayerSpec::Conv1d { filters: 3, kernel_size: 2, activation: Activation::Tanh, dropout: 0.0 }],
        ..ModelSpec::mlp(0, 0, Activation::Tanh)
    };
    check_model(tdnn, &[3, 4, 10], 3);
    let rnn = ModelSpec {
        timesteps: Some(3),
        layers: vec![
            LayerSpec::Lstm { units: 3, attention: true, activation: Activation::Tanh, dropout: 0.0 },
            LayerSpec::Gru { units: 2, attention: true, activation: Activation::Tanh, dropout: 0.0 },
        ],
        ..ModelSpec::mlp(0, 0, Activation::Tanh)
    };
    check_model(rnn, &[2, 3, 10], 4);
}

#[test]
fn exp_head_gradient() {
    let spec = ModelSpec { output_exp: true, ..ModelSpec::mlp(4, 1, Activation::Sigmoid) };
    check_model(spec, &[6, 10], 5);
}
