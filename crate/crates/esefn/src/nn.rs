//! Layer building blocks: initialized weights plus a forward method.
//!
//! All weights start uniform in `±sqrt(6 / (fan_in + fan_out))` and biases
//! at zero. Parameters are gradient-tracking tensors shared by handle, so a
//! layer can be used across many graphs while one optimizer updates it.

use rand::Rng;

use crate::error::Result;
use crate::tensor::{Graph, Tensor};

pub(crate) fn xavier_uniform<R: Rng>(
    rng: &mut R,
    dims: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Result<Tensor> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = dims.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
    Ok(Tensor::from_vec(dims, data)?.with_grad())
}

/// Fully connected layer `x -> weight * x + bias`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Linear> {
        Ok(Linear {
            weight: xavier_uniform(rng, &[out_dim, in_dim], in_dim, out_dim)?,
            bias: Tensor::zeros(&[out_dim])?.with_grad(),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn forward(&self, g: &Graph, x: &Tensor) -> Result<Tensor> {
        g.fully_connected(x, &self.weight, &self.bias)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        out.push((format!("{prefix}.bias"), self.bias.clone()));
    }
}

/// Two fully connected layers with a rectifier between them; the hidden
/// width equals the output width.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Mlp> {
        Ok(Mlp {
            fc1: Linear::new(in_dim, out_dim, rng)?,
            fc2: Linear::new(out_dim, out_dim, rng)?,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.fc1.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.fc2.out_dim()
    }

    pub fn forward(&self, g: &Graph, x: &Tensor) -> Result<Tensor> {
        let h = self.fc1.forward(g, x)?;
        let h = g.relu(&h)?;
        self.fc2.forward(g, &h)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.fc1.collect_params(&format!("{prefix}.fc1"), out);
        self.fc2.collect_params(&format!("{prefix}.fc2"), out);
    }
}

/// 1-d convolution layer (cross-correlation, zero padding).
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1d {
    pub fn new<R: Rng>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Conv1d> {
        Ok(Conv1d {
            weight: xavier_uniform(
                rng,
                &[out_channels, in_channels, kernel],
                in_channels * kernel,
                out_channels * kernel,
            )?,
            bias: Tensor::zeros(&[out_channels])?.with_grad(),
            stride,
            padding,
        })
    }

    pub fn forward(&self, g: &Graph, x: &Tensor) -> Result<Tensor> {
        g.conv1d(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        out.push((format!("{prefix}.bias"), self.bias.clone()));
    }
}

/// 1-d transposed convolution layer; expands the spatial axis.
#[derive(Debug, Clone)]
pub struct ConvTranspose1d {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
}

impl ConvTranspose1d {
    pub fn new<R: Rng>(
        channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<ConvTranspose1d> {
        Ok(ConvTranspose1d {
            weight: xavier_uniform(
                rng,
                &[channels, channels, kernel],
                channels * kernel,
                channels * kernel,
            )?,
            bias: Tensor::zeros(&[channels])?.with_grad(),
            stride,
            padding,
        })
    }

    pub fn forward(&self, g: &Graph, x: &Tensor) -> Result<Tensor> {
        g.conv1d_transposed(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        out.push((format!("{prefix}.weight"), self.weight.clone()));
        out.push((format!("{prefix}.bias"), self.bias.clone()));
    }
}
