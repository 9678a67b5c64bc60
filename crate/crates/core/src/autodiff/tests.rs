use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn check_gradients<F>(params: &ParamStore, build: F) -> f64
where
    F: Fn(&mut Graph, &ParamStore) -> crate::Result<Var>,
{
    let mut g = Graph::new();
    let loss = build(&mut g, params).unwrap();
    let analytic = g.backward(loss).unwrap();
    let numeric = finite_difference_gradient(
        |p| {
            let mut g = Graph::inference();
            let l = build(&mut g, p)?;
            Ok(g.value(l).item().unwrap())
        },
        params,
        1e-6,
    )
    .unwrap();
    relative_error(&analytic, &numeric, 1e-8).unwrap()
}

#[test]
fn tanh_at_origin() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_vec(vec![0.0]));
    let y = g.tanh(x).unwrap();
    assert_eq!(g.value(y).data(), &[0.0]);
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut g = Graph::new();
    let x = g.constant(Tensor::from_vec(vec![0.0, 0.0]));
    let y = g.softmax(x, 0).unwrap();
    assert_eq!(g.value(y).data(), &[0.5, 0.5]);
}

#[test]
fn concat_one_dimensional() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::from_vec(vec![1.0, 2.0]));
    let b = g.constant(Tensor::from_vec(vec![3.0]));
    let c = g.concat(&[a, b], 0).unwrap();
    assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0]);
}

#[test]
fn tanh_derivative_at_zero_is_one() {
    let mut g = Graph::new();
    let w = g.param("w", &Tensor::scalar(0.0));
    let y = g.tanh(w).unwrap();
    let grads = g.backward(y).unwrap();
    assert_eq!(grads.get("w").unwrap().data(), &[1.0]);
}

#[test]
fn square_sum_gradient() {
    let mut g = Graph::new();
    let w = g.param("w", &Tensor::from_vec(vec![1.0, 2.0]));
    let sq = g.mul(w, w).unwrap();
    let loss = g.sum_all(sq).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get("w").unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn relu_subgradient_at_zero_is_zero() {
    let mut g = Graph::new();
    let w = g.param("w", &Tensor::from_vec(vec![0.0, 1.0, -1.0]));
    let y = g.relu(w).unwrap();
    let loss = g.sum_all(y).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get("w").unwrap().data(), &[0.0, 1.0, 0.0]);
}

#[test]
fn shape_mismatch_names_op_and_shapes() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[3, 2]));
    let err = g.add(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("add") && msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
}

#[test]
fn gather_out_of_range_reports_index() {
    let mut g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    match g.gather_rows(a, vec![0, 5]) {
        Err(Error::IndexOutOfRange { index: 5, len: 2, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut g = Graph::new();
    let w = g.param("w", &Tensor::from_vec(vec![1.0, 2.0]));
    let y = g.tanh(w).unwrap();
    assert!(matches!(g.backward(y), Err(Error::NonScalarLoss(_))));
}

#[test]
fn backward_rejects_disconnected_loss() {
    let mut g = Graph::new();
    let _w = g.param("w", &Tensor::from_vec(vec![1.0]));
    let c = g.constant(Tensor::scalar(3.0));
    assert!(matches!(g.backward(c), Err(Error::Disconnected)));
}

#[test]
fn foreign_variable_is_rejected() {
    let mut g1 = Graph::new();
    let mut g2 = Graph::new();
    let a = g1.constant(Tensor::scalar(1.0));
    assert!(matches!(g2.tanh(a), Err(Error::ForeignVariable)));
}

#[test]
fn unreached_parameters_get_zero_gradients() {
    let mut g = Graph::new();
    let w = g.param("w", &Tensor::from_vec(vec![1.0]));
    let _u = g.param("unused", &Tensor::zeros(&[2, 2]));
    let loss = g.sum_all(w).unwrap();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get("unused").unwrap(), &Tensor::zeros(&[2, 2]));
}

#[test]
fn finite_difference_of_quadratic() {
    let mut p = ParamStore::new();
    p.insert("w", Tensor::scalar(3.0));
    let fd = finite_difference_gradient(
        |p| {
            let w = p.get("w").unwrap().item().unwrap();
            Ok(w * w)
        },
        &p,
        1e-6,
    )
    .unwrap();
    assert!((fd.get("w").unwrap().item().unwrap() - 6.0).abs() < 1e-6);
}

#[test]
fn finite_difference_of_relu_in_flat_region() {
    let mut p = ParamStore::new();
    p.insert("w", Tensor::scalar(-1.0));
    let fd = finite_difference_gradient(|p| Ok(p.get("w").unwrap().item().unwrap().max(0.0)), &p, 1e-6).unwrap();
    assert_eq!(fd.get("w").unwrap().item().unwrap(), 0.0);
}

#[test]
fn finite_difference_rejects_bad_step() {
    let p = ParamStore::new();
    assert!(finite_difference_gradient(|_| Ok(0.0), &p, 0.0).is_err());
}

/// Two-layer perceptron on 8 inputs, checked against central differences.
#[test]
fn perceptron_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut params = ParamStore::new();
    params.insert("x", random_tensor(&mut rng, &[5, 8]));
    params.insert("w1", random_tensor(&mut rng, &[8, 6]));
    params.insert("b1", random_tensor(&mut rng, &[6]));
    params.insert("w2", random_tensor(&mut rng, &[6, 1]));
    params.insert("b2", random_tensor(&mut rng, &[1]));
    let err = check_gradients(&params, |g, p| {
        let x = g.param("x", p.get("x").unwrap());
        let w1 = g.param("w1", p.get("w1").unwrap());
        let b1 = g.param("b1", p.get("b1").unwrap());
        let w2 = g.param("w2", p.get("w2").unwrap());
        let b2 = g.param("b2", p.get("b2").unwrap());
        let h = g.linear(x, w1, Some(b1))?;
        let h = g.tanh(h)?;
        let y = g.linear(h, w2, Some(b2))?;
        let y2 = g.mul(y, y)?;
        g.sum_all(y2)
    });
    assert!(err < 1e-5, "relative error {err}");
}

#[test]
fn every_op_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut params = ParamStore::new();
    params.insert("a", random_tensor(&mut rng, &[4, 3, 2]));
    params.insert("b", random_tensor(&mut rng, &[4, 3, 2]));
    params.insert("c", random_tensor(&mut rng, &[4, 3, 5]));
    let err = check_gradients(&params, |g, p| {
        let a = g.param("a", p.get("a").unwrap());
        let b = g.param("b", p.get("b").unwrap());
        let c = g.param("c", p.get("c").unwrap());
        let s = g.add(a, b)?;
        let d = g.sub(s, b)?;
        let d = g.scale(d, 1.7)?;
        let m = g.mul(d, b)?;
        let t = g.tanh(m)?;
        let cat = g.concat(&[t, c], 2)?; // [4,3,7]
        let sm = g.softmax(cat, 1)?;
        let w = g.mul(sm, cat)?;
        let n = g.norm_last(w)?; // [4,3,1]
        let mx = g.max_axis(cat, 2)?; // [4,3]
        let mx = g.reshape(mx, &[4, 3, 1])?;
        let both = g.concat(&[n, mx], 2)?; // [4,3,2]
        let flat = g.reshape(both, &[4, 6])?;
        let gathered = g.gather_rows(flat, vec![3, 0, 0, 2])?;
        let sum = g.sum_axis(gathered, 0)?;
        let mean = g.mean_axis(sum, 0)?;
        let r = g.relu(flat)?;
        let rs = g.sum_all(r)?;
        let total = g.add(mean, rs)?;
        Ok(total)
    });
    assert!(err < 1e-5, "relative error {err}");
}

#[test]
fn recording_does_not_change_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_tensor(&mut rng, &[6, 4]);
    let w = random_tensor(&mut rng, &[4, 4]);
    let run = |mut g: Graph| {
        let xv = g.param("x", &x);
        let wv = g.param("w", &w);
        let h = g.linear(xv, wv, None).unwrap();
        let h = g.relu(h).unwrap();
        let s = g.softmax(h, 1).unwrap();
        g.value(s).clone()
    };
    assert_eq!(run(Graph::new()), run(Graph::inference()));
}

#[test]
fn inference_graph_has_no_backward() {
    let mut g = Graph::inference();
    let w = g.param("w", &Tensor::scalar(1.0));
    let y = g.tanh(w).unwrap();
    assert!(matches!(g.backward(y), Err(Error::Disconnected)));
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut params = ParamStore::new();
    params.insert("w", Tensor::scalar(0.0));
    let mut grads = GradientMap::new();
    grads.insert("w", Tensor::scalar(1.0));
    let mut state = AdamState::new(AdamConfig::default());
    state.update(&mut params, &grads, 1e-3).unwrap();
    // m_hat = 1, v_hat = 1 after bias correction: step = lr / (1 + eps)
    let w = params.get("w").unwrap().item().unwrap();
    assert!((w + 1e-3).abs() < 1e-6, "{w}");
    assert_eq!(state.step, 1);
}

#[test]
fn adam_zero_gradient_leaves_params() {
    let mut params = ParamStore::new();
    params.insert("w", Tensor::from_vec(vec![0.3, -2.0]));
    let before = params.clone();
    let mut grads = GradientMap::new();
    grads.insert("w", Tensor::zeros(&[2]));
    let mut state = AdamState::new(AdamConfig::default());
    for _ in 0..3 {
        state.update(&mut params, &grads, 1e-3).unwrap();
    }
    assert_eq!(params, before);
}

#[test]
fn adam_rejects_shape_mismatch_and_missing_grads() {
    let mut params = ParamStore::new();
    params.insert("w", Tensor::zeros(&[2]));
    let mut state = AdamState::new(AdamConfig::default());
    let mut grads = GradientMap::new();
    assert!(matches!(
        state.update(&mut params, &grads, 1e-3),
        Err(Error::MissingGradient(_))
    ));
    grads.insert("w", Tensor::zeros(&[3]));
    assert!(matches!(
        state.update(&mut params, &grads, 1e-3),
        Err(Error::ShapeMismatch { .. })
    ));
    assert_eq!(state.step, 0);
}

#[test]
fn adam_runs_are_bitwise_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut params = ParamStore::new();
        params.insert("w", random_tensor(&mut rng, &[3, 3]));
        let mut state = AdamState::new(AdamConfig::default());
        for _ in 0..10 {
            let mut grads = GradientMap::new();
            grads.insert("w", random_tensor(&mut rng, &[3, 3]));
            state.update(&mut params, &grads, 1e-2).unwrap();
        }
        (params, state)
    };
    let (p1, s1) = run();
    let (p2, s2) = run();
    assert_eq!(p1, p2);
    assert_eq!(s1, s2);
    assert!(s1.second_moment("w").unwrap().data().iter().all(|&v| v >= 0.0));
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(
        logits in proptest::collection::vec(-30.0f64..30.0, 12),
        axis in 0usize..2,
    ) {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(vec![3, 4], logits).unwrap());
        let y = g.softmax(x, axis).unwrap();
        let v = g.value(y);
        prop_assert!(v.data().iter().all(|&p| p >= 0.0));
        let mut g2 = Graph::new();
        let yc = g2.constant(v.clone());
        let s = g2.sum_axis(yc, axis).unwrap();
        for &total in g2.value(s).data() {
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
