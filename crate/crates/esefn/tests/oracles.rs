//! Kernel-level checks against independent naive oracles, plus
//! finite-difference gradient verification for every operation.

mod common;

use common::*;
use esefn::{finite_diff_grad, max_rel_error, Graph, Tensor};
use rand::Rng;

const TIGHT: f64 = 1e-12;
const GRAD_TOL: f64 = 1e-4;
const EPS: f64 = 1e-6;

// ---- conv1d ---------------------------------------------------------------

#[test]
fn conv1d_identity_kernel_is_identity() {
    let g = Graph::new();
    let x = Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    let w = Tensor::from_vec(&[1, 1, 3], vec![0.0, 1.0, 0.0]).unwrap();
    let b = Tensor::zeros(&[1]).unwrap();
    let y = g.conv1d(&x, &w, &b, 1, 1).unwrap();
    assert_eq!(y.dims(), &[1, 3]);
    assert_eq!(y.values(), vec![1.0, 2.0, 3.0]);
}

#[test]
fn conv1d_sum_kernel() {
    let g = Graph::new();
    let x = Tensor::from_vec(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    let w = Tensor::from_vec(&[1, 1, 3], vec![1.0, 1.0, 1.0]).unwrap();
    let b = Tensor::zeros(&[1]).unwrap();
    let y = g.conv1d(&x, &w, &b, 1, 0).unwrap();
    assert_eq!(y.values(), vec![6.0]);
}

#[test]
fn conv1d_matches_triple_loop_oracle() {
    let mut r = rng(101);
    let x = rand_tensor(&mut r, &[2, 8], 1.0);
    let w = rand_tensor(&mut r, &[3, 2, 3], 1.0);
    let b = rand_tensor(&mut r, &[3], 0.5);
    for (stride, pad) in [(1, 0), (1, 1), (2, 1), (3, 2)] {
        let g = Graph::new();
        let y = g.conv1d(&x, &w, &b, stride, pad).unwrap();
        let oracle = naive_conv1d(
            &x.values(),
            2,
            8,
            &w.values(),
            3,
            3,
            &b.values(),
            stride,
            pad,
        );
        assert!(
            max_abs_diff(&y.values(), &oracle) < TIGHT,
            "stride {stride} pad {pad}"
        );
    }
}

#[test]
fn conv1d_shape_errors_name_both_shapes() {
    let g = Graph::new();
    let x = Tensor::zeros(&[3, 8]).unwrap();
    let w = Tensor::zeros(&[2, 4, 3]).unwrap();
    let b = Tensor::zeros(&[2]).unwrap();
    let err = g.conv1d(&x, &w, &b, 1, 0).unwrap_err().to_string();
    assert!(err.contains("[3, 8]") && err.contains("[2, 4, 3]"), "{err}");
}

#[test]
fn conv1d_kernel_longer_than_padded_input_rejected() {
    let g = Graph::new();
    let x = Tensor::zeros(&[1, 2]).unwrap();
    let w = Tensor::zeros(&[1, 1, 5]).unwrap();
    let b = Tensor::zeros(&[1]).unwrap();
    assert!(g.conv1d(&x, &w, &b, 1, 1).is_err());
    assert!(g.conv1d(&x, &w, &b, 1, 2).is_ok()); // padded length 6 >= 5
}

#[test]
fn conv1d_gradients_match_finite_differences() {
    let mut r = rng(7);
    let x = rand_tensor(&mut r, &[2, 6], 1.0).with_grad();
    let w = rand_tensor(&mut r, &[3, 2, 3], 1.0).with_grad();
    let b = rand_tensor(&mut r, &[3], 0.5).with_grad();
    let run = |_: &Tensor| {
        let g = Graph::new();
        let y = g.conv1d(&x, &w, &b, 2, 1)?;
        let rows = g.row_sums(&y)?;
        // weight the outputs so the gradient is not uniform
        let weights = Tensor::from_vec(&[3, 3], (1..=9).map(f64::from).collect())?;
        let prod = g.scale_rows(&weights, &rows)?;
        g.sum(&g.row_sums(&prod)?)?.item()
    };
    let g = Graph::new();
    let y = g.conv1d(&x, &w, &b, 2, 1).unwrap();
    let rows = g.row_sums(&y).unwrap();
    let weights = Tensor::from_vec(&[3, 3], (1..=9).map(f64::from).collect()).unwrap();
    let prod = g.scale_rows(&weights, &rows).unwrap();
    let loss = g.sum(&g.row_sums(&prod).unwrap()).unwrap();
    g.backward(&loss).unwrap();

    for t in [&x, &w, &b] {
        let numeric = finite_diff_grad(run, t, EPS).unwrap();
        let err = max_rel_error(&t.grad().unwrap(), &numeric.values());
        assert!(err < GRAD_TOL, "rel err {err}");
    }
}

// ---- conv1d_transposed ------------------------------------------------------

#[test]
fn conv1d_transposed_zero_input_gives_zero_output_of_expected_length() {
    let g = Graph::new();
    let x = Tensor::zeros(&[2, 2]).unwrap();
    let w = rand_tensor(&mut rng(3), &[2, 2, 3], 1.0);
    let b = Tensor::zeros(&[2]).unwrap();
    let y = g.conv1d_transposed(&x, &w, &b, 1, 0).unwrap();
    // L_out = (2 - 1) * 1 - 0 + 3 = 4
    assert_eq!(y.dims(), &[2, 4]);
    assert!(y.values().iter().all(|&v| v == 0.0));
}

#[test]
fn conv1d_transposed_rejects_non_expanding_configs() {
    let g = Graph::new();
    let x = Tensor::zeros(&[1, 4]).unwrap();
    let w = Tensor::zeros(&[1, 1, 3]).unwrap();
    let b = Tensor::zeros(&[1]).unwrap();
    // (4-1)*1 - 2*1 + 3 = 4 == len: no expansion
    assert!(g.conv1d_transposed(&x, &w, &b, 1, 1).is_err());
    assert!(g.conv1d_transposed(&x, &w, &b, 1, 0).is_ok());
}

#[test]
fn conv1d_transposed_matches_adjoint_matrix_oracle() {
    let mut r = rng(55);
    for (c, len, k, stride, pad) in [(2, 4, 3, 1, 0), (3, 3, 5, 1, 1), (2, 3, 4, 2, 1)] {
        let x = rand_tensor(&mut r, &[c, len], 1.0);
        let w = rand_tensor(&mut r, &[c, c, k], 1.0);
        let b = rand_tensor(&mut r, &[c], 0.5);
        let g = Graph::new();
        let y = g.conv1d_transposed(&x, &w, &b, stride, pad).unwrap();
        let oracle = naive_conv1d_transposed(
            &x.values(),
            c,
            len,
            &w.values(),
            k,
            &b.values(),
            stride,
            pad,
        );
        assert!(
            max_abs_diff(&y.values(), &oracle) < TIGHT,
            "c={c} len={len} k={k} stride={stride} pad={pad}"
        );
    }
}

#[test]
fn conv1d_transposed_gradients_match_finite_differences() {
    let mut r = rng(9);
    let x = rand_tensor(&mut r, &[2, 3], 1.0).with_grad();
    let w = rand_tensor(&mut r, &[2, 2, 3], 1.0).with_grad();
    let b = rand_tensor(&mut r, &[2], 0.5).with_grad();
    let run = |_: &Tensor| {
        let g = Graph::new();
        let y = g.conv1d_transposed(&x, &w, &b, 1, 0)?;
        let s = g.sigmoid(&y)?;
        g.sum(&g.row_sums(&s)?)?.item()
    };
    let g = Graph::new();
    let y = g.conv1d_transposed(&x, &w, &b, 1, 0).unwrap();
    let s = g.sigmoid(&y).unwrap();
    let loss = g.sum(&g.row_sums(&s).unwrap()).unwrap();
    g.backward(&loss).unwrap();

    for t in [&x, &w, &b] {
        let numeric = finite_diff_grad(run, t, EPS).unwrap();
        let err = max_rel_error(&t.grad().unwrap(), &numeric.values());
        assert!(err < GRAD_TOL, "rel err {err}");
    }
}

// ---- global_avg_pool --------------------------------------------------------

#[test]
fn pool_examples() {
    let g = Graph::new();
    let constant = Tensor::from_vec(&[1, 5], vec![2.5; 5]).unwrap();
    assert_eq!(g.global_avg_pool(&constant).unwrap().values(), vec![2.5]);

    let x = Tensor::from_vec(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(g.global_avg_pool(&x).unwrap().values(), vec![2.5]);
}

#[test]
fn pool_matches_double_loop_oracle() {
    let mut r = rng(12);
    let x = rand_tensor(&mut r, &[5, 7], 2.0);
    let g = Graph::new();
    let y = g.global_avg_pool(&x).unwrap();
    let oracle = naive_avg_pool(&x.values(), 5, 7);
    assert!(max_abs_diff(&y.values(), &oracle) < 1e-15);
}

#[test]
fn pool_gradient_distributes_uniformly() {
    let x = rand_tensor(&mut rng(1), &[3, 4], 1.0).with_grad();
    let g = Graph::new();
    let y = g.global_avg_pool(&x).unwrap();
    let loss = g.sum(&y).unwrap();
    g.backward(&loss).unwrap();
    assert!(x.grad().unwrap().iter().all(|&v| v == 0.25));
}

// ---- fully_connected ----------------------------------------------------------

#[test]
fn fc_identity_and_bias_examples() {
    let g = Graph::new();
    let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 3.0]).unwrap();
    let eye = Tensor::from_vec(&[3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
    let zero_b = Tensor::zeros(&[3]).unwrap();
    assert_eq!(
        g.fully_connected(&x, &eye, &zero_b).unwrap().values(),
        x.values()
    );

    let zero_w = Tensor::zeros(&[2, 3]).unwrap();
    let b = Tensor::from_vec(&[2], vec![0.7, -0.1]).unwrap();
    assert_eq!(
        g.fully_connected(&x, &zero_w, &b).unwrap().values(),
        vec![0.7, -0.1]
    );
}

#[test]
fn fc_matches_dot_product_oracle() {
    let mut r = rng(40);
    let x = rand_tensor(&mut r, &[6], 1.5);
    let w = rand_tensor(&mut r, &[4, 6], 1.5);
    let b = rand_tensor(&mut r, &[4], 1.0);
    let g = Graph::new();
    let y = g.fully_connected(&x, &w, &b).unwrap();
    let oracle = naive_fc(&x.values(), &w.values(), 4, 6, &b.values());
    assert!(max_abs_diff(&y.values(), &oracle) < TIGHT);
}

#[test]
fn fc_gradients_match_finite_differences() {
    let mut r = rng(41);
    let x = rand_tensor(&mut r, &[5], 1.0).with_grad();
    let w = rand_tensor(&mut r, &[3, 5], 1.0).with_grad();
    let b = rand_tensor(&mut r, &[3], 1.0).with_grad();
    let run = |_: &Tensor| {
        let g = Graph::new();
        let y = g.fully_connected(&x, &w, &b)?;
        let s = g.sigmoid(&y)?;
        g.sum(&s)?.item()
    };
    let g = Graph::new();
    let y = g.fully_connected(&x, &w, &b).unwrap();
    let s = g.sigmoid(&y).unwrap();
    let loss = g.sum(&s).unwrap();
    g.backward(&loss).unwrap();
    for t in [&x, &w, &b] {
        let numeric = finite_diff_grad(run, t, EPS).unwrap();
        assert!(max_rel_error(&t.grad().unwrap(), &numeric.values()) < GRAD_TOL);
    }
}

// ---- activations ----------------------------------------------------------

#[test]
fn activation_examples() {
    let g = Graph::new();
    let x = Tensor::from_vec(&[3], vec![0.0, -3.0, 3.0]).unwrap();
    let s = g.sigmoid(&x).unwrap().values();
    assert_eq!(s[0], 0.5);
    assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
    assert_eq!(g.relu(&x).unwrap().values(), vec![0.0, 0.0, 3.0]);
}

#[test]
fn sigmoid_gradient_at_zero_is_quarter() {
    let x = Tensor::scalar(0.0).unwrap().with_grad();
    let g = Graph::new();
    let y = g.sigmoid(&x).unwrap();
    g.backward(&y).unwrap();
    let analytic = x.grad().unwrap()[0];
    assert!((analytic - 0.25).abs() < 1e-15);

    let numeric = finite_diff_grad(
        |t| {
            let g = Graph::new();
            g.sigmoid(t)?.item()
        },
        &x,
        EPS,
    )
    .unwrap();
    assert!((numeric.values()[0] - 0.25).abs() < 1e-9);
}

// ---- softmax_cross_entropy ---------------------------------------------------

#[test]
fn cross_entropy_examples() {
    let g = Graph::new();
    let uniform = Tensor::from_vec(&[4], vec![0.3; 4]).unwrap();
    let loss = g.softmax_cross_entropy(&uniform, 2).unwrap().item().unwrap();
    assert!((loss - 4.0f64.ln()).abs() < 1e-15);

    let saturated = Tensor::from_vec(&[3], vec![100.0, 0.0, 0.0]).unwrap();
    let loss = g
        .softmax_cross_entropy(&saturated, 0)
        .unwrap()
        .item()
        .unwrap();
    assert!(loss >= 0.0 && loss < 1e-40, "loss {loss}");

    assert!(g.softmax_cross_entropy(&uniform, 4).is_err());
}

#[test]
fn cross_entropy_matches_direct_formula_oracle() {
    let mut r = rng(77);
    for _ in 0..50 {
        let logits = rand_tensor(&mut r, &[6], 5.0);
        let label = r.gen_range(0..6);
        let g = Graph::new();
        let got = g
            .softmax_cross_entropy(&logits, label)
            .unwrap()
            .item()
            .unwrap();
        let want = naive_softmax_ce(&logits.values(), label);
        assert!((got - want).abs() < 1e-10, "got {got}, oracle {want}");
    }
}

#[test]
fn cross_entropy_gradient_is_softmax_minus_onehot() {
    let logits = Tensor::from_vec(&[4], vec![0.5, -1.0, 2.0, 0.0])
        .unwrap()
        .with_grad();
    let g = Graph::new();
    let loss = g.softmax_cross_entropy(&logits, 2).unwrap();
    g.backward(&loss).unwrap();
    let grad = logits.grad().unwrap();
    assert!(grad.iter().sum::<f64>().abs() < 1e-12);

    let numeric = finite_diff_grad(
        |t| {
            let g = Graph::new();
            g.softmax_cross_entropy(t, 2)?.item()
        },
        &logits,
        EPS,
    )
    .unwrap();
    assert!(max_rel_error(&grad, &numeric.values()) < GRAD_TOL);
}

// ---- backward contracts ------------------------------------------------------

#[test]
fn backward_of_sum_is_all_ones() {
    let x = Tensor::from_vec(&[4], vec![0.3, -1.0, 2.0, 5.5])
        .unwrap()
        .with_grad();
    let g = Graph::new();
    let loss = g.sum(&x).unwrap();
    g.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
}

#[test]
fn backward_through_sigmoid_dot_matches_finite_differences() {
    let w = Tensor::from_vec(&[1, 3], vec![0.2, -0.4, 0.9])
        .unwrap()
        .with_grad();
    let x = Tensor::from_vec(&[3], vec![1.0, 2.0, -0.5]).unwrap();
    let b = Tensor::zeros(&[1]).unwrap();
    let run = |_: &Tensor| {
        let g = Graph::new();
        let y = g.fully_connected(&x, &w, &b)?;
        g.sigmoid(&y)?.item()
    };
    let g = Graph::new();
    let y = g.fully_connected(&x, &w, &b).unwrap();
    let loss = g.sigmoid(&y).unwrap();
    g.backward(&loss).unwrap();
    let numeric = finite_diff_grad(run, &w, EPS).unwrap();
    assert!(max_rel_error(&w.grad().unwrap(), &numeric.values()) < 1e-6);
}

#[test]
fn repeated_backward_without_zeroing_doubles_grads() {
    let x = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0])
        .unwrap()
        .with_grad();
    let g = Graph::new();
    let s = g.sigmoid(&x).unwrap();
    let loss = g.sum(&s).unwrap();
    g.backward(&loss).unwrap();
    let once = x.grad().unwrap();
    g.backward(&loss).unwrap();
    let twice = x.grad().unwrap();
    let doubled: Vec<f64> = once.iter().map(|v| 2.0 * v).collect();
    assert_eq!(twice, doubled);

    x.zero_grad();
    g.backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), once);
}

#[test]
fn backward_rejects_non_scalar_seed() {
    let x = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap().with_grad();
    let g = Graph::new();
    let y = g.relu(&x).unwrap();
    assert!(g.backward(&y).is_err());
}
