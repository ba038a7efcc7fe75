//! Naive reference evaluators, independent of the library's kernels and
//! graph machinery. Everything here is plain loops over `Vec<f64>`.

#![allow(dead_code)] // each integration test binary uses a subset

use esefn::nn::{Conv1d, Linear, Mlp};
use esefn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn rand_tensor<R: Rng>(rng: &mut R, dims: &[usize], scale: f64) -> Tensor {
    let n = dims.iter().product();
    Tensor::from_vec(dims, rand_vec(rng, n, scale)).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch: {} vs {}", a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn conv1d_out_len(len: usize, k: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - k) / stride + 1
}

/// Triple-loop cross-correlation: `x` is `[c_in, len]`, `w` is
/// `[c_out, c_in, k]`, zero padding.
pub fn naive_conv1d(
    x: &[f64],
    c_in: usize,
    len: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let l_out = conv1d_out_len(len, k, stride, pad);
    let mut out = vec![0.0; c_out * l_out];
    for co in 0..c_out {
        for lo in 0..l_out {
            let mut acc = bias[co];
            for ci in 0..c_in {
                for t in 0..k {
                    let li = (lo * stride + t) as isize - pad as isize;
                    if li >= 0 && (li as usize) < len {
                        acc += w[(co * c_in + ci) * k + t] * x[ci * len + li as usize];
                    }
                }
            }
            out[co * l_out + lo] = acc;
        }
    }
    out
}

/// Dense matrix of the conv1d map `[c, len_in] -> [c, len_out]` for square
/// channel counts, built column by column from unit inputs.
pub fn conv1d_matrix(
    c: usize,
    len_in: usize,
    w: &[f64],
    k: usize,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize) {
    let len_out = conv1d_out_len(len_in, k, stride, pad);
    let rows = c * len_out;
    let cols = c * len_in;
    let zero_bias = vec![0.0; c];
    let mut m = vec![0.0; rows * cols];
    for col in 0..cols {
        let mut unit = vec![0.0; cols];
        unit[col] = 1.0;
        let y = naive_conv1d(&unit, c, len_in, w, c, k, &zero_bias, stride, pad);
        for (row, v) in y.iter().enumerate() {
            m[row * cols + col] = *v;
        }
    }
    (m, len_out)
}

/// Transposed convolution via the adjoint matrix: build the conv1d matrix
/// that maps length `l_out` down to `len`, transpose it, apply, add bias.
pub fn naive_conv1d_transposed(
    x: &[f64],
    c: usize,
    len: usize,
    w: &[f64],
    k: usize,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> Vec<f64> {
    let l_out = (len - 1) * stride + k - 2 * pad;
    let (m, check) = conv1d_matrix(c, l_out, w, k, stride, pad);
    assert_eq!(check, len, "adjoint pair lengths disagree");
    let rows = c * len; // rows of M
    let cols = c * l_out; // cols of M
    let mut out = vec![0.0; cols];
    for j in 0..cols {
        let mut acc = bias[j / l_out];
        for i in 0..rows {
            acc += m[i * cols + j] * x[i];
        }
        out[j] = acc;
    }
    out
}

/// Mean over each channel's spatial positions.
pub fn naive_avg_pool(x: &[f64], c: usize, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; c];
    for ci in 0..c {
        let mut acc = 0.0;
        for l in 0..len {
            acc += x[ci * len + l];
        }
        out[ci] = acc / len as f64;
    }
    out
}

/// Dot-product fully connected layer: `w` is `[q, p]`.
pub fn naive_fc(x: &[f64], w: &[f64], q: usize, p: usize, bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; q];
    for i in 0..q {
        let mut acc = bias[i];
        for j in 0..p {
            acc += w[i * p + j] * x[j];
        }
        out[i] = acc;
    }
    out
}

/// Stable logistic function (two-branch form, like the production kernel;
/// the branches agree to the last unit elsewhere).
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub fn map(x: &[f64], f: fn(f64) -> f64) -> Vec<f64> {
    x.iter().map(|&v| f(v)).collect()
}

/// Direct-formula cross entropy `-ln(exp(x_label) / sum exp(x_j))` with a
/// compensated (Neumaier) sum. Valid for moderate logits; the production
/// path must agree with it there.
pub fn naive_softmax_ce(logits: &[f64], label: usize) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in logits {
        let e = v.exp();
        let t = sum + e;
        comp += if sum.abs() >= e.abs() {
            (sum - t) + e
        } else {
            (e - t) + sum
        };
        sum = t;
    }
    -((logits[label].exp() / (sum + comp)).ln())
}

/// Values and shape of a linear layer, for naive re-evaluation.
pub fn fc_of(layer: &Linear) -> (Vec<f64>, usize, usize, Vec<f64>) {
    let dims = layer.weight.dims().to_vec();
    (layer.weight.values(), dims[0], dims[1], layer.bias.values())
}

pub fn naive_linear(layer: &Linear, x: &[f64]) -> Vec<f64> {
    let (w, q, p, b) = fc_of(layer);
    naive_fc(x, &w, q, p, &b)
}

pub fn naive_mlp(mlp: &Mlp, x: &[f64]) -> Vec<f64> {
    let h = map(&naive_linear(&mlp.fc1, x), relu);
    naive_linear(&mlp.fc2, &h)
}

pub fn naive_conv_layer(conv: &Conv1d, x: &[f64], c_in: usize, len: usize) -> (Vec<f64>, usize) {
    let dims = conv.weight.dims().to_vec();
    assert_eq!(dims[1], c_in);
    let out = naive_conv1d(
        x,
        c_in,
        len,
        &conv.weight.values(),
        dims[0],
        dims[2],
        &conv.bias.values(),
        conv.stride,
        conv.padding,
    );
    (out, dims[0])
}

// ---- step-by-step block oracles ---------------------------------------------

use esefn::attention::{CNet, MNet, SeBlock};
use esefn::EseFn;

pub fn se_oracle(se: &SeBlock, x: &[f64], c: usize, len: usize) -> (Vec<f64>, Vec<f64>) {
    let pooled = naive_avg_pool(x, c, len);
    let hidden = map(&naive_linear(&se.fc_reduce, &pooled), relu);
    let attn = map(&naive_linear(&se.fc_expand, &hidden), sigmoid);
    let mut gated = vec![0.0; c * len];
    for ci in 0..c {
        for l in 0..len {
            gated[ci * len + l] = x[ci * len + l] * attn[ci];
        }
    }
    (gated, attn)
}

pub fn mnet_oracle(mnet: &MNet, f: &[f64], n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    let (h, c) = naive_conv_layer(&mnet.conv3, f, n, d);
    let (h, c) = naive_conv_layer(&mnet.conv2, &h, c, d);
    let (expanded, m) = naive_conv_layer(&mnet.conv1, &h, c, d);
    let squeezed = naive_avg_pool(&expanded, m, d);
    let hidden = map(&naive_linear(&mnet.fc4, &squeezed), relu);
    let attn = map(&naive_linear(&mnet.fc3, &hidden), sigmoid);
    let mut gated = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            gated[i * d + j] = f[i * d + j] * attn[i];
        }
    }
    (gated, attn)
}

pub fn cnet_oracle(cnet: &CNet, h: &[f64], d: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let k = cnet.conv4.weight.dims()[2];
    let expanded = naive_conv1d_transposed(
        h,
        d,
        n,
        &cnet.conv4.weight.values(),
        k,
        &cnet.conv4.bias.values(),
        cnet.conv4.stride,
        cnet.conv4.padding,
    );
    let n1 = (n - 1) * cnet.conv4.stride + k - 2 * cnet.conv4.padding;
    let squeezed = naive_avg_pool(&expanded, d, n1);
    let hidden = map(&naive_linear(&cnet.fc6, &squeezed), relu);
    let attn = map(&naive_linear(&cnet.fc5, &hidden), sigmoid);
    let mut gated = vec![0.0; d * n];
    for c in 0..d {
        for j in 0..n {
            gated[c * n + j] = h[c * n + j] * attn[c];
        }
    }
    (gated, attn)
}

/// Full-pipeline oracle for a model with ESE attention at both sites.
pub fn fuse_oracle(model: &EseFn, f_r: &[f64], f_s: &[f64]) -> Vec<f64> {
    let a = naive_mlp(&model.proj_r, f_r);
    let b = naive_mlp(&model.proj_s, f_s);
    let d = a.len();
    // column-stacked [d, 2], transposed view [2, d]
    let mut modal_view = vec![0.0; 2 * d];
    modal_view[..d].copy_from_slice(&a);
    modal_view[d..].copy_from_slice(&b);
    let mnet = match &model.modal {
        Some(esefn::fusion::ModalFusion::Ese(mnet)) => mnet,
        _ => panic!("oracle expects the full model"),
    };
    let (h_m, _) = mnet_oracle(mnet, &modal_view, 2, d);
    // transpose [2, d] -> [d, 2]
    let mut channel_view = vec![0.0; d * 2];
    for i in 0..2 {
        for j in 0..d {
            channel_view[j * 2 + i] = h_m[i * d + j];
        }
    }
    let cnet = match &model.channel {
        Some(esefn::fusion::ChannelFusion::Ese(cnet)) => cnet,
        _ => panic!("oracle expects the full model"),
    };
    let (h_mc, _) = cnet_oracle(cnet, &channel_view, d, 2);
    (0..d).map(|c| h_mc[c * 2] + h_mc[c * 2 + 1]).collect()
}
