//! Differentiable operations, recorded on a [`Graph`].
//!
//! Every operation validates shapes up front (naming both shapes in the
//! error), computes the forward value, checks it for NaN/infinity, and
//! records a backward closure. Convolution is cross-correlation (no kernel
//! flip), the usual deep-learning convention.

use crate::error::{shape_str, Error, Result};

use super::{Graph, Tensor};

/// Which argument `min2` selected. Ties pick `Left`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selected {
    Left,
    Right,
}

fn ensure_finite(op: &'static str, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op: op.to_string() })
    }
}

fn rank1(op: &'static str, t: &Tensor) -> Result<usize> {
    match t.dims() {
        [n] => Ok(*n),
        d => Err(Error::Dimension {
            op,
            detail: format!("expected a rank-1 tensor, got dims {}", shape_str(d)),
        }),
    }
}

fn rank2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.dims() {
        [r, c] => Ok((*r, *c)),
        d => Err(Error::Dimension {
            op,
            detail: format!("expected a rank-2 tensor, got dims {}", shape_str(d)),
        }),
    }
}

fn rank3(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match t.dims() {
        [a, b, c] => Ok((*a, *b, *c)),
        d => Err(Error::Dimension {
            op,
            detail: format!("expected a rank-3 tensor, got dims {}", shape_str(d)),
        }),
    }
}

impl Graph {
    /// 1-d cross-correlation with zero padding.
    ///
    /// `input` is `[c_in, len]`, `weights` is `[c_out, c_in, k]`, `bias` is
    /// `[c_out]`. Output length is `(len + 2*padding - k) / stride + 1`.
    pub fn conv1d(
        &self,
        input: &Tensor,
        weights: &Tensor,
        bias: &Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor> {
        const OP: &str = "conv1d";
        let (c_in, len) = rank2(OP, input)?;
        let (c_out, c_in_w, k) = rank3(OP, weights)?;
        let bias_len = rank1(OP, bias)?;
        if c_in_w != c_in {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "weights {} expect {c_in_w} input channels, input {} has {c_in}",
                    shape_str(weights.dims()),
                    shape_str(input.dims())
                ),
            });
        }
        if bias_len != c_out {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "bias {} does not match {c_out} output channels of weights {}",
                    shape_str(bias.dims()),
                    shape_str(weights.dims())
                ),
            });
        }
        if stride == 0 {
            return Err(Error::Config("conv1d stride must be >= 1".to_string()));
        }
        if len + 2 * padding < k {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "kernel size {k} exceeds padded length {} (input {}, padding {padding})",
                    len + 2 * padding,
                    shape_str(input.dims())
                ),
            });
        }
        let l_out = (len + 2 * padding - k) / stride + 1;

        let x = input.data_ref();
        let w = weights.data_ref();
        let b = bias.data_ref();
        let mut out = vec![0.0; c_out * l_out];
        for co in 0..c_out {
            for lo in 0..l_out {
                let mut acc = b[co];
                for ci in 0..c_in {
                    for t in 0..k {
                        let li = (lo * stride + t) as isize - padding as isize;
                        if li >= 0 && (li as usize) < len {
                            acc += w[(co * c_in + ci) * k + t] * x[ci * len + li as usize];
                        }
                    }
                }
                out[co * l_out + lo] = acc;
            }
        }
        ensure_finite(OP, &out)?;
        drop(x);
        drop(w);
        drop(b);

        let output = Tensor::new_unchecked(vec![c_out, l_out], out);
        let (xt, wt, bt) = (input.clone(), weights.clone(), bias.clone());
        let (want_x, want_w, want_b) = (
            self.wants_grad(input),
            self.wants_grad(weights),
            self.wants_grad(bias),
        );
        self.record(&output, &[input, weights, bias], move |gout, store| {
            let x = xt.data_ref();
            let w = wt.data_ref();
            let mut gx = if want_x { vec![0.0; c_in * len] } else { vec![] };
            let mut gw = if want_w {
                vec![0.0; c_out * c_in * k]
            } else {
                vec![]
            };
            let mut gb = if want_b { vec![0.0; c_out] } else { vec![] };
            for co in 0..c_out {
                for lo in 0..l_out {
                    let g = gout[co * l_out + lo];
                    if want_b {
                        gb[co] += g;
                    }
                    for ci in 0..c_in {
                        for t in 0..k {
                            let li = (lo * stride + t) as isize - padding as isize;
                            if li >= 0 && (li as usize) < len {
                                let li = li as usize;
                                if want_w {
                                    gw[(co * c_in + ci) * k + t] += g * x[ci * len + li];
                                }
                                if want_x {
                                    gx[ci * len + li] += g * w[(co * c_in + ci) * k + t];
                                }
                            }
                        }
                    }
                }
            }
            drop(x);
            drop(w);
            if want_x {
                store.accumulate(&xt, &gx);
            }
            if want_w {
                store.accumulate(&wt, &gw);
            }
            if want_b {
                store.accumulate(&bt, &gb);
            }
        });
        Ok(output)
    }

    /// 1-d transposed convolution: the linear adjoint of [`Graph::conv1d`]
    /// with the same weights, stride, and padding, plus a bias.
    ///
    /// `input` is `[c, len]`, `weights` is `[c, c, k]` indexed
    /// `[c_in][c_out][t]`, `bias` is `[c]`. Output length is
    /// `(len - 1) * stride - 2 * padding + k` and must exceed `len`: this
    /// operation exists to expand the spatial axis.
    pub fn conv1d_transposed(
        &self,
        input: &Tensor,
        weights: &Tensor,
        bias: &Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor> {
        const OP: &str = "conv1d_transposed";
        let (c, len) = rank2(OP, input)?;
        let (c_a, c_b, k) = rank3(OP, weights)?;
        let bias_len = rank1(OP, bias)?;
        if c_a != c || c_b != c {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "weights must be [c, c, k] with c = {c} input channels, got {}",
                    shape_str(weights.dims())
                ),
            });
        }
        if bias_len != c {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "bias {} does not match {c} channels",
                    shape_str(bias.dims())
                ),
            });
        }
        if stride == 0 {
            return Err(Error::Config(
                "conv1d_transposed stride must be >= 1".to_string(),
            ));
        }
        let expanded = (len - 1) * stride + k;
        if expanded <= 2 * padding || expanded - 2 * padding <= len {
            return Err(Error::Config(format!(
                "conv1d_transposed must expand the spatial axis: \
                 len {len}, kernel {k}, stride {stride}, padding {padding} \
                 give output length {}",
                expanded as isize - 2 * padding as isize,
            )));
        }
        let l_out = expanded - 2 * padding;

        let x = input.data_ref();
        let w = weights.data_ref();
        let b = bias.data_ref();
        let mut out = vec![0.0; c * l_out];
        for (co, row) in out.chunks_mut(l_out).enumerate() {
            row.fill(b[co]);
        }
        for ci in 0..c {
            for j in 0..len {
                let v = x[ci * len + j];
                for co in 0..c {
                    for t in 0..k {
                        let lo = (j * stride + t) as isize - padding as isize;
                        if lo >= 0 && (lo as usize) < l_out {
                            out[co * l_out + lo as usize] += v * w[(ci * c + co) * k + t];
                        }
                    }
                }
            }
        }
        ensure_finite(OP, &out)?;
        drop(x);
        drop(w);
        drop(b);

        let output = Tensor::new_unchecked(vec![c, l_out], out);
        let (xt, wt, bt) = (input.clone(), weights.clone(), bias.clone());
        let (want_x, want_w, want_b) = (
            self.wants_grad(input),
            self.wants_grad(weights),
            self.wants_grad(bias),
        );
        self.record(&output, &[input, weights, bias], move |gout, store| {
            let x = xt.data_ref();
            let w = wt.data_ref();
            let mut gx = if want_x { vec![0.0; c * len] } else { vec![] };
            let mut gw = if want_w { vec![0.0; c * c * k] } else { vec![] };
            let mut gb = if want_b { vec![0.0; c] } else { vec![] };
            if want_b {
                for co in 0..c {
                    for lo in 0..l_out {
                        gb[co] += gout[co * l_out + lo];
                    }
                }
            }
            for ci in 0..c {
                for j in 0..len {
                    for co in 0..c {
                        for t in 0..k {
                            let lo = (j * stride + t) as isize - padding as isize;
                            if lo >= 0 && (lo as usize) < l_out {
                                let g = gout[co * l_out + lo as usize];
                                if want_x {
                                    gx[ci * len + j] += g * w[(ci * c + co) * k + t];
                                }
                                if want_w {
                                    gw[(ci * c + co) * k + t] += g * x[ci * len + j];
                                }
                            }
                        }
                    }
                }
            }
            drop(x);
            drop(w);
            if want_x {
                store.accumulate(&xt, &gx);
            }
            if want_w {
                store.accumulate(&wt, &gw);
            }
            if want_b {
                store.accumulate(&bt, &gb);
            }
        });
        Ok(output)
    }

    /// Mean over the spatial axis: `[c, len] -> [c]`.
    pub fn global_avg_pool(&self, input: &Tensor) -> Result<Tensor> {
        const OP: &str = "global_avg_pool";
        let (c, len) = rank2(OP, input)?;
        let x = input.data_ref();
        let inv = 1.0 / len as f64;
        let out: Vec<f64> = (0..c)
            .map(|ci| x[ci * len..(ci + 1) * len].iter().sum::<f64>() * inv)
            .collect();
        ensure_finite(OP, &out)?;
        drop(x);

        let output = Tensor::new_unchecked(vec![c], out);
        let xt = input.clone();
        let want_x = self.wants_grad(input);
        self.record(&output, &[input], move |gout, store| {
            if !want_x {
                return;
            }
            let mut gx = vec![0.0; c * len];
            for ci in 0..c {
                let g = gout[ci] * inv;
                for slot in &mut gx[ci * len..(ci + 1) * len] {
                    *slot = g;
                }
            }
            store.accumulate(&xt, &gx);
        });
        Ok(output)
    }

    /// Affine map `weights * input + bias` with `input [p]`,
    /// `weights [q, p]`, `bias [q]`.
    pub fn fully_connected(&self, input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
        const OP: &str = "fully_connected";
        let p = rank1(OP, input)?;
        let (q, p_w) = rank2(OP, weights)?;
        let bias_len = rank1(OP, bias)?;
        if p_w != p {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "weights {} expect input of length {p_w}, got {}",
                    shape_str(weights.dims()),
                    shape_str(input.dims())
                ),
            });
        }
        if bias_len != q {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "bias {} does not match {q} rows of weights {}",
                    shape_str(bias.dims()),
                    shape_str(weights.dims())
                ),
            });
        }

        let x = input.data_ref();
        let w = weights.data_ref();
        let b = bias.data_ref();
        let out: Vec<f64> = (0..q)
            .map(|i| {
                b[i] + w[i * p..(i + 1) * p]
                    .iter()
                    .zip(x.iter())
                    .map(|(wi, xi)| wi * xi)
                    .sum::<f64>()
            })
            .collect();
        ensure_finite(OP, &out)?;
        drop(x);
        drop(w);
        drop(b);

        let output = Tensor::new_unchecked(vec![q], out);
        let (xt, wt, bt) = (input.clone(), weights.clone(), bias.clone());
        let (want_x, want_w, want_b) = (
            self.wants_grad(input),
            self.wants_grad(weights),
            self.wants_grad(bias),
        );
        self.record(&output, &[input, weights, bias], move |gout, store| {
            let x = xt.data_ref();
            let w = wt.data_ref();
            if want_x {
                let mut gx = vec![0.0; p];
                for i in 0..q {
                    let g = gout[i];
                    for j in 0..p {
                        gx[j] += g * w[i * p + j];
                    }
                }
                store.accumulate(&xt, &gx);
            }
            if want_w {
                let mut gw = vec![0.0; q * p];
                for i in 0..q {
                    let g = gout[i];
                    for j in 0..p {
                        gw[i * p + j] = g * x[j];
                    }
                }
                store.accumulate(&wt, &gw);
            }
            drop(x);
            drop(w);
            if want_b {
                store.accumulate(&bt, gout);
            }
        });
        Ok(output)
    }

    /// Elementwise logistic sigmoid; outputs lie strictly in (0, 1).
    pub fn sigmoid(&self, input: &Tensor) -> Result<Tensor> {
        let out: Vec<f64> = input.data_ref().iter().map(|&v| stable_sigmoid(v)).collect();
        ensure_finite("sigmoid", &out)?;
        let output = Tensor::new_unchecked(input.dims().to_vec(), out);
        let xt = input.clone();
        let yt = output.clone();
        let want_x = self.wants_grad(input);
        self.record(&output, &[input], move |gout, store| {
            if !want_x {
                return;
            }
            let y = yt.data_ref();
            let gx: Vec<f64> = gout
                .iter()
                .zip(y.iter())
                .map(|(g, yi)| g * yi * (1.0 - yi))
                .collect();
            drop(y);
            store.accumulate(&xt, &gx);
        });
        Ok(output)
    }

    /// Elementwise rectifier `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&self, input: &Tensor) -> Result<Tensor> {
        let out: Vec<f64> = input.data_ref().iter().map(|&v| v.max(0.0)).collect();
        let output = Tensor::new_unchecked(input.dims().to_vec(), out);
        let xt = input.clone();
        let want_x = self.wants_grad(input);
        self.record(&output, &[input], move |gout, store| {
            if !want_x {
                return;
            }
            let x = xt.data_ref();
            let gx: Vec<f64> = gout
                .iter()
                .zip(x.iter())
                .map(|(g, xi)| if *xi > 0.0 { *g } else { 0.0 })
                .collect();
            drop(x);
            store.accumulate(&xt, &gx);
        });
        Ok(output)
    }

    /// Cross-entropy of a softmax over `logits [k]` against a class index,
    /// in max-subtracted log-sum-exp form. The gradient is
    /// `softmax(logits) - one_hot(label)`.
    pub fn softmax_cross_entropy(&self, logits: &Tensor, label: usize) -> Result<Tensor> {
        const OP: &str = "softmax_cross_entropy";
        let k = rank1(OP, logits)?;
        if label >= k {
            return Err(Error::Input(format!(
                "label {label} out of range for {k} classes"
            )));
        }
        let x = logits.data_ref();
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = x.iter().map(|v| (v - max).exp()).sum();
        let loss = max + sum.ln() - x[label];
        let probs: Vec<f64> = x.iter().map(|v| (v - max).exp() / sum).collect();
        drop(x);
        ensure_finite(OP, &[loss])?;

        let output = Tensor::new_unchecked(vec![1], vec![loss]);
        let xt = logits.clone();
        let want_x = self.wants_grad(logits);
        self.record(&output, &[logits], move |gout, store| {
            if !want_x {
                return;
            }
            let g = gout[0];
            let mut gx: Vec<f64> = probs.iter().map(|p| g * p).collect();
            gx[label] -= g;
            store.accumulate(&xt, &gx);
        });
        Ok(output)
    }

    /// Matrix transpose `[r, c] -> [c, r]`.
    pub fn transpose(&self, input: &Tensor) -> Result<Tensor> {
        const OP: &str = "transpose";
        let (r, c) = rank2(OP, input)?;
        let x = input.data_ref();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = x[i * c + j];
            }
        }
        drop(x);
        let output = Tensor::new_unchecked(vec![c, r], out);
        let xt = input.clone();
        let want_x = self.wants_grad(input);
        self.record(&output, &[input], move |gout, store| {
            if !want_x {
                return;
            }
            let mut gx = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    gx[i * c + j] = gout[j * r + i];
                }
            }
            store.accumulate(&xt, &gx);
        });
        Ok(output)
    }

    /// Stacks `n` equal-length vectors as the columns of a `[len, n]`
    /// matrix: column `j` is `columns[j]`.
    pub fn concat_cols(&self, columns: &[&Tensor]) -> Result<Tensor> {
        const OP: &str = "concat_cols";
        if columns.is_empty() {
            return Err(Error::Input("concat_cols needs at least one column".to_string()));
        }
        let len = rank1(OP, columns[0])?;
        for col in columns {
            let l = rank1(OP, col)?;
            if l != len {
                return Err(Error::Dimension {
                    op: OP,
                    detail: format!(
                        "columns must share one length, got {} and {}",
                        shape_str(columns[0].dims()),
                        shape_str(col.dims())
                    ),
                });
            }
        }
        let n = columns.len();
        let mut out = vec![0.0; len * n];
        for (j, col) in columns.iter().enumerate() {
            let c = col.data_ref();
            for i in 0..len {
                out[i * n + j] = c[i];
            }
        }
        let output = Tensor::new_unchecked(vec![len, n], out);
        let owned: Vec<Tensor> = columns.iter().map(|c| (*c).clone()).collect();
        let wants: Vec<bool> = columns.iter().map(|c| self.wants_grad(c)).collect();
        self.record(&output, columns, move |gout, store| {
            for (j, col) in owned.iter().enumerate() {
                if !wants[j] {
                    continue;
                }
                let gcol: Vec<f64> = (0..len).map(|i| gout[i * n + j]).collect();
                store.accumulate(col, &gcol);
            }
        });
        Ok(output)
    }

    /// Joins rank-1 tensors end to end into one vector.
    pub fn concat_vecs(&self, parts: &[&Tensor]) -> Result<Tensor> {
        const OP: &str = "concat_vecs";
        if parts.is_empty() {
            return Err(Error::Input("concat_vecs needs at least one part".to_string()));
        }
        let mut lens = Vec::with_capacity(parts.len());
        let mut out = Vec::new();
        for part in parts {
            lens.push(rank1(OP, part)?);
            out.extend_from_slice(&part.data_ref());
        }
        let output = Tensor::new_unchecked(vec![out.len()], out);
        let owned: Vec<Tensor> = parts.iter().map(|p| (*p).clone()).collect();
        let wants: Vec<bool> = parts.iter().map(|p| self.wants_grad(p)).collect();
        self.record(&output, parts, move |gout, store| {
            let mut at = 0;
            for ((part, len), want) in owned.iter().zip(&lens).zip(&wants) {
                if *want {
                    store.accumulate(part, &gout[at..at + len]);
                }
                at += len;
            }
        });
        Ok(output)
    }

    /// Scales row `i` of `input [r, c]` by `scales[i]`.
    pub fn scale_rows(&self, input: &Tensor, scales: &Tensor) -> Result<Tensor> {
        const OP: &str = "scale_rows";
        let (r, c) = rank2(OP, input)?;
        let s_len = rank1(OP, scales)?;
        if s_len != r {
            return Err(Error::Dimension {
                op: OP,
                detail: format!(
                    "scales {} must match the {r} rows of input {}",
                    shape_str(scales.dims()),
                    shape_str(input.dims())
                ),
            });
        }
        let x = input.data_ref();
        let s = scales.data_ref();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[i * c + j] = x[i * c + j] * s[i];
            }
        }
        ensure_finite(OP, &out)?;
        drop(x);
        drop(s);

        let output = Tensor::new_unchecked(vec![r, c], out);
        let (xt, st) = (input.clone(), scales.clone());
        let (want_x, want_s) = (self.wants_grad(input), self.wants_grad(scales));
        self.record(&output, &[input, scales], move |gout, store| {
            let x = xt.data_ref();
            let s = st.data_ref();
            if want_x {
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        gx[i * c + j] = gout[i * c + j] * s[i];
                    }
                }
                store.accumulate(&xt, &gx);
            }
            if want_s {
                let mut gs = vec![0.0; r];
                for i in 0..r {
                    for j in 0..c {
                        gs[i] += gout[i * c + j] * x[i * c + j];
                    }
                }
                store.accumulate(&st, &gs);
            }
        });
        Ok(output)
    }

    /// Sums each row of `[r, c]` into a length-`r` vector.
    pub fn row_sums(&self, input: &Tensor) -> Result<Tensor> {
        const OP: &str = "row_sums";
        let (r, c) = rank2(OP, input)?;
        let x = input.data_ref();
        let out: Vec<f64> = (0..r)
            .map(|i| x[i * c..(i + 1) * c].iter().sum())
            .collect();
        ensure_finite(OP, &out)?;
        drop(x);
        let output = Tensor::new_unchecked(vec![r], out);
        let xt = input.clone();
        let want_x = self.wants_grad(input);
        self.record(&output, &[input], move |gout, store| {
            if !want_x {
                return;
            }
            let mut gx = vec![0.0; r * c];
            for i in 0..r {
                for slot in &mut gx[i * c..(i + 1) * c] {
                    *slot = gout[i];
                }
            }
            store.accumulate(&xt, &gx);
        });
        Ok(output)
    }

    /// Sums all elements of a rank-1 tensor into a scalar.
    pub fn sum(&self, input: &Tensor) -> Result<Tensor> {
        let n = rank1("sum", input)?;
        let total: f64 = input.data_ref().iter().sum();
        ensure_finite("sum", &[total])?;
        let output = Tensor::new_unchecked(vec![1], vec![total]);
        let xt = input.clone();
        let want_x = self.wants_grad(input);
        self.record(&output, &[input], move |gout, store| {
            if want_x {
                store.accumulate(&xt, &vec![gout[0]; n]);
            }
        });
        Ok(output)
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.zip("add", a, b, |x, y| x + y, 1.0)
    }

    /// Elementwise difference `a - b`.
    pub fn sub(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        self.zip("sub", a, b, |x, y| x - y, -1.0)
    }

    fn zip(
        &self,
        op: &'static str,
        a: &Tensor,
        b: &Tensor,
        f: fn(f64, f64) -> f64,
        b_coeff: f64,
    ) -> Result<Tensor> {
        if a.dims() != b.dims() {
            return Err(Error::Dimension {
                op,
                detail: format!(
                    "operands must share dims, got {} and {}",
                    shape_str(a.dims()),
                    shape_str(b.dims())
                ),
            });
        }
        let out: Vec<f64> = a
            .data_ref()
            .iter()
            .zip(b.data_ref().iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        ensure_finite(op, &out)?;
        let output = Tensor::new_unchecked(a.dims().to_vec(), out);
        let (at, bt) = (a.clone(), b.clone());
        let (want_a, want_b) = (self.wants_grad(a), self.wants_grad(b));
        self.record(&output, &[a, b], move |gout, store| {
            if want_a {
                store.accumulate(&at, gout);
            }
            if want_b {
                let gb: Vec<f64> = gout.iter().map(|g| g * b_coeff).collect();
                store.accumulate(&bt, &gb);
            }
        });
        Ok(output)
    }

    /// Multiplies every element by the finite constant `factor`.
    pub fn scale(&self, input: &Tensor, factor: f64) -> Result<Tensor> {
        if !factor.is_finite() {
            return Err(Error::Input(format!("scale factor must be finite, got {factor}")));
        }
        let out: Vec<f64> = input.data_ref().iter().map(|v| v * factor).collect();
        ensure_finite("scale", &out)?;
        let output = Tensor::new_unchecked(input.dims().to_vec(), out);
        let xt = input.clone();
        let want_x = self.wants_grad(input);
        self.record(&output, &[input], move |gout, store| {
            if want_x {
                let gx: Vec<f64> = gout.iter().map(|g| g * factor).collect();
                store.accumulate(&xt, &gx);
            }
        });
        Ok(output)
    }

    /// Minimum of two scalars. The gradient flows only into the selected
    /// argument; ties select the left one.
    pub fn min2(&self, a: &Tensor, b: &Tensor) -> Result<(Tensor, Selected)> {
        let (av, bv) = (a.item()?, b.item()?);
        let selected = if av <= bv {
            Selected::Left
        } else {
            Selected::Right
        };
        let output = Tensor::new_unchecked(vec![1], vec![av.min(bv)]);
        let (at, bt) = (a.clone(), b.clone());
        let (want_a, want_b) = (self.wants_grad(a), self.wants_grad(b));
        self.record(&output, &[a, b], move |gout, store| match selected {
            Selected::Left if want_a => store.accumulate(&at, gout),
            Selected::Right if want_b => store.accumulate(&bt, gout),
            _ => {}
        });
        Ok((output, selected))
    }

    /// Arithmetic mean of scalar tensors.
    pub fn mean(&self, values: &[Tensor]) -> Result<Tensor> {
        if values.is_empty() {
            return Err(Error::Input("mean needs at least one value".to_string()));
        }
        let mut total = 0.0;
        for v in values {
            total += v.item()?;
        }
        let n = values.len() as f64;
        let out = total / n;
        ensure_finite("mean", &[out])?;
        let output = Tensor::new_unchecked(vec![1], vec![out]);
        let owned: Vec<Tensor> = values.to_vec();
        let wants: Vec<bool> = values.iter().map(|v| self.wants_grad(v)).collect();
        let refs: Vec<&Tensor> = values.iter().collect();
        self.record(&output, &refs, move |gout, store| {
            let g = gout[0] / n;
            for (v, want) in owned.iter().zip(&wants) {
                if *want {
                    store.accumulate(v, &[g]);
                }
            }
        });
        Ok(output)
    }
}

/// Overflow-free logistic function.
fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
