//! Property tests for the algebraic invariants.

mod common;

use common::rng;
use esefn::attention::{CNet, MNet};
use esefn::{multimodal_loss, Graph, LossWeights, Modality, Tensor};
use proptest::prelude::*;

fn finite_vec(len: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, len)
}

proptest! {
    #[test]
    fn pool_is_linear(
        x in finite_vec(12, 10.0),
        y in finite_vec(12, 10.0),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let g = Graph::new();
        let xt = Tensor::from_vec(&[3, 4], x.clone()).unwrap();
        let yt = Tensor::from_vec(&[3, 4], y.clone()).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let mixed = Tensor::from_vec(&[3, 4], mix).unwrap();

        let lhs = g.global_avg_pool(&mixed).unwrap().values();
        let px = g.global_avg_pool(&xt).unwrap().values();
        let py = g.global_avg_pool(&yt).unwrap().values();
        for i in 0..3 {
            prop_assert!((lhs[i] - (a * px[i] + b * py[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_identity_kernel_is_identity(x in finite_vec(10, 5.0)) {
        let g = Graph::new();
        let xt = Tensor::from_vec(&[1, 10], x.clone()).unwrap();
        let w = Tensor::from_vec(&[1, 1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let y = g.conv1d(&xt, &w, &b, 1, 1).unwrap();
        prop_assert_eq!(y.values(), x);
    }

    #[test]
    fn cross_entropy_nonnegative_and_grad_sums_to_zero(
        logits in finite_vec(5, 12.0),
        label in 0usize..5,
    ) {
        let t = Tensor::from_vec(&[5], logits).unwrap().with_grad();
        let g = Graph::new();
        let loss = g.softmax_cross_entropy(&t, label).unwrap();
        prop_assert!(loss.item().unwrap() >= 0.0);
        g.backward(&loss).unwrap();
        let sum: f64 = t.grad().unwrap().iter().sum();
        prop_assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_cost_ln_k(c in -20.0..20.0f64) {
        let t = Tensor::from_vec(&[7], vec![c; 7]).unwrap();
        let g = Graph::new();
        let loss = g.softmax_cross_entropy(&t, 3).unwrap().item().unwrap();
        prop_assert!((loss - 7.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_pass_is_deterministic(x in finite_vec(24, 3.0)) {
        let mnet = MNet::new(2, 12, 2, &mut rng(5)).unwrap();
        let f = Tensor::from_vec(&[2, 12], x).unwrap();
        let g1 = Graph::new();
        let (h1, a1) = mnet.forward(&g1, &f).unwrap();
        let g2 = Graph::new();
        let (h2, a2) = mnet.forward(&g2, &f).unwrap();
        prop_assert_eq!(h1.values(), h2.values());
        prop_assert_eq!(a1.values(), a2.values());
    }

    #[test]
    fn modal_attention_bounds_and_row_identities(
        x in finite_vec(24, 8.0),
        seed in 0u64..2000,
    ) {
        let mnet = MNet::new(2, 12, 2, &mut rng(seed)).unwrap();
        let f = Tensor::from_vec(&[2, 12], x).unwrap();
        let g = Graph::new();
        let (gated, attn) = mnet.forward(&g, &f).unwrap();
        let w = attn.values();
        prop_assert!(w.iter().all(|&v| v > 0.0 && v < 1.0));

        // Row i of the output is exactly row i of the input times w[i],
        // and gating never amplifies.
        let fx = f.values();
        let gx = gated.values();
        for i in 0..2 {
            for j in 0..12 {
                prop_assert_eq!(gx[i * 12 + j], fx[i * 12 + j] * w[i]);
                prop_assert!(gx[i * 12 + j].abs() <= fx[i * 12 + j].abs());
            }
        }
    }

    #[test]
    fn channel_attention_bounds_and_row_identities(
        x in finite_vec(20, 8.0),
        seed in 0u64..2000,
    ) {
        let cnet = CNet::new(10, 2, 2, &mut rng(seed)).unwrap();
        let h = Tensor::from_vec(&[10, 2], x).unwrap();
        let g = Graph::new();
        let (gated, attn) = cnet.forward(&g, &h).unwrap();
        let w = attn.values();
        prop_assert!(w.iter().all(|&v| v > 0.0 && v < 1.0));
        let hx = h.values();
        let gx = gated.values();
        for c in 0..10 {
            for j in 0..2 {
                prop_assert_eq!(gx[c * 2 + j], hx[c * 2 + j] * w[c]);
                prop_assert!(gx[c * 2 + j].abs() <= hx[c * 2 + j].abs());
            }
        }
    }

    #[test]
    fn loss_identity_holds(
        l_r in 0.0..10.0f64,
        l_s in 0.0..10.0f64,
        l_rs in 0.0..10.0f64,
        alpha in 0.05..1.0f64,
        frac in 0.0..0.99f64,
    ) {
        let beta = alpha * frac; // guarantees alpha > beta >= 0
        let w = LossWeights::new(alpha, beta).unwrap();
        let g = Graph::new();
        let (tr, ts, trs) = (
            Tensor::scalar(l_r).unwrap(),
            Tensor::scalar(l_s).unwrap(),
            Tensor::scalar(l_rs).unwrap(),
        );
        let (_, b) = multimodal_loss(&g, &tr, &ts, &trs, &w).unwrap();

        // both algebraic forms of the objective
        let direct = alpha * l_rs + beta * (l_r.min(l_s) - l_rs);
        let expanded = (alpha - beta) * l_rs + beta * l_r.min(l_s);
        prop_assert!((b.l_total - direct).abs() < 1e-12);
        prop_assert!((b.l_total - expanded).abs() < 1e-12);
        prop_assert_eq!(
            b.min_branch,
            if l_r <= l_s { Modality::Rgb } else { Modality::Skeleton }
        );

        // beta = 0 degrades to pure fused-head weighting, exactly
        let w0 = LossWeights::fused_only(alpha).unwrap();
        let (_, b0) = multimodal_loss(&g, &tr, &ts, &trs, &w0).unwrap();
        prop_assert_eq!(b0.l_total, alpha * l_rs);
    }
}
