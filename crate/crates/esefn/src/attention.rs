//! Attention blocks: the squeeze-excitation baseline and the two
//! expansion-squeeze-excitation fusion nets.
//!
//! All three share the same skeleton: reduce a `[channels, length]` map to
//! one value per channel, pass that through a bottleneck pair of fully
//! connected layers, and gate each channel's row with the resulting sigmoid
//! attention. The fusion nets additionally *expand* the map with
//! convolutions before squeezing, so the pooled representation has seen
//! local cross-position interactions instead of a bare global average.
//!
//! [`MNet`] treats modalities as channels (input `[n, d]`) and gates whole
//! modalities; [`CNet`] treats feature dimensions as channels (input
//! `[d, n]`) and gates per-dimension across modalities.

use rand::Rng;

use crate::error::{shape_str, Error, Result};
use crate::nn::{Conv1d, ConvTranspose1d, Linear};
use crate::tensor::{Graph, Tensor};

/// A sigmoid attention vector; every entry lies strictly in (0, 1).
#[derive(Debug, Clone)]
pub struct AttentionVector(Tensor);

impl AttentionVector {
    pub(crate) fn new(t: Tensor) -> AttentionVector {
        AttentionVector(t)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.values()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn check_input(op: &'static str, x: &Tensor, rows: usize, cols: usize) -> Result<()> {
    if x.dims() != [rows, cols] {
        return Err(Error::Dimension {
            op,
            detail: format!(
                "expected input dims [{rows}, {cols}], got {}",
                shape_str(x.dims())
            ),
        });
    }
    Ok(())
}

/// Squeeze-excitation block: pool, bottleneck, gate. No expansion; this is
/// the baseline the fusion nets are measured against.
#[derive(Debug, Clone)]
pub struct SeBlock {
    pub fc_reduce: Linear,
    pub fc_expand: Linear,
    channels: usize,
    reduction: usize,
}

impl SeBlock {
    pub fn new<R: Rng>(channels: usize, reduction: usize, rng: &mut R) -> Result<SeBlock> {
        if reduction == 0 {
            return Err(Error::Config("se reduction ratio must be >= 1".to_string()));
        }
        if channels == 0 || channels % reduction != 0 {
            return Err(Error::Config(format!(
                "channel count {channels} must be a positive multiple of the reduction ratio {reduction}"
            )));
        }
        Ok(SeBlock {
            fc_reduce: Linear::new(channels, channels / reduction, rng)?,
            fc_expand: Linear::new(channels / reduction, channels, rng)?,
            channels,
            reduction,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    /// Gates each channel of `x = [channels, len]` with its attention
    /// weight. Returns the gated map and the attention vector.
    pub fn forward(&self, g: &Graph, x: &Tensor) -> Result<(Tensor, AttentionVector)> {
        match x.dims() {
            [c, _] if *c == self.channels => {}
            d => {
                return Err(Error::Dimension {
                    op: "se_attention",
                    detail: format!(
                        "expected [{}, len] input, got {}",
                        self.channels,
                        shape_str(d)
                    ),
                })
            }
        }
        let pooled = g.global_avg_pool(x)?;
        let reduced = g.relu(&self.fc_reduce.forward(g, &pooled)?)?;
        let attn = g.sigmoid(&self.fc_expand.forward(g, &reduced)?)?;
        let gated = g.scale_rows(x, &attn)?;
        Ok((gated, AttentionVector::new(attn)))
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.fc_reduce.collect_params(&format!("{prefix}.fc_reduce"), out);
        self.fc_expand.collect_params(&format!("{prefix}.fc_expand"), out);
    }
}

/// Modal-fusion net. Input `[n, d]`: one row per modality.
///
/// The expansion stack is three convolutions along the feature axis with
/// kernels 3, 5, 7, stride 1, and same-padding, widening the channel count
/// `n -> 2n -> 4n -> m` with `m = 8n`. This keeps the expanded map at
/// `m * d > n * d` positions while the pooled representation stays at
/// `m < n * d` values, which forces `d > 8`.
#[derive(Debug, Clone)]
pub struct MNet {
    /// Applied first: `n -> 2n`, kernel 3.
    pub conv3: Conv1d,
    /// Applied second: `2n -> 4n`, kernel 5.
    pub conv2: Conv1d,
    /// Applied last: `4n -> m`, kernel 7.
    pub conv1: Conv1d,
    /// Bottleneck in: `m -> m / reduction`.
    pub fc4: Linear,
    /// Bottleneck out: `m / reduction -> n`.
    pub fc3: Linear,
    modalities: usize,
    feature_dim: usize,
    reduction: usize,
}

impl MNet {
    pub fn new<R: Rng>(
        modalities: usize,
        feature_dim: usize,
        reduction: usize,
        rng: &mut R,
    ) -> Result<MNet> {
        let (n, d) = (modalities, feature_dim);
        if n < 2 {
            return Err(Error::Config(format!(
                "modal fusion needs at least 2 modalities, got {n}"
            )));
        }
        let m = 8 * n;
        // The expansion must hold more positions than the input while the
        // squeezed vector stays smaller than the input.
        if m * d <= n * d {
            return Err(Error::Config(format!(
                "expanded size {m}x{d} does not exceed input size {n}x{d}"
            )));
        }
        if m >= n * d {
            return Err(Error::Config(format!(
                "pooled width m = {m} must stay below n*d = {}; feature dim must exceed 8",
                n * d
            )));
        }
        debug_assert_eq!(m % n, 0);
        if reduction == 0 || m % reduction != 0 {
            return Err(Error::Config(format!(
                "expanded width {m} must be a positive multiple of the reduction ratio {reduction}"
            )));
        }
        Ok(MNet {
            conv3: Conv1d::new(n, 2 * n, 3, 1, 1, rng)?,
            conv2: Conv1d::new(2 * n, 4 * n, 5, 1, 2, rng)?,
            conv1: Conv1d::new(4 * n, m, 7, 1, 3, rng)?,
            fc4: Linear::new(m, m / reduction, rng)?,
            fc3: Linear::new(m / reduction, n, rng)?,
            modalities: n,
            feature_dim: d,
            reduction,
        })
    }

    pub fn modalities(&self) -> usize {
        self.modalities
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    /// Expanded channel width `m`.
    pub fn expanded_width(&self) -> usize {
        8 * self.modalities
    }

    /// Expand, squeeze, excite, gate. Returns the modal-gated feature
    /// (row `i` of the input scaled by attention `i`) and the attention.
    pub fn forward(&self, g: &Graph, f: &Tensor) -> Result<(Tensor, AttentionVector)> {
        check_input("mnet_forward", f, self.modalities, self.feature_dim)?;
        let expanded = self.conv3.forward(g, f)?;
        let expanded = self.conv2.forward(g, &expanded)?;
        let expanded = self.conv1.forward(g, &expanded)?;
        let squeezed = g.global_avg_pool(&expanded)?;
        let hidden = g.relu(&self.fc4.forward(g, &squeezed)?)?;
        let attn = g.sigmoid(&self.fc3.forward(g, &hidden)?)?;
        let gated = g.scale_rows(f, &attn)?;
        Ok((gated, AttentionVector::new(attn)))
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.conv3.collect_params(&format!("{prefix}.conv3"), out);
        self.conv2.collect_params(&format!("{prefix}.conv2"), out);
        self.conv1.collect_params(&format!("{prefix}.conv1"), out);
        self.fc4.collect_params(&format!("{prefix}.fc4"), out);
        self.fc3.collect_params(&format!("{prefix}.fc3"), out);
    }
}

/// Channel-fusion net. Input `[d, n]`: one row per feature dimension.
///
/// A single transposed convolution (kernel 3, stride 1, no padding)
/// expands the modal axis from `n` to `n + 2` positions before the squeeze;
/// one layer is enough here because the map it sees has already been fused
/// modal-wise.
#[derive(Debug, Clone)]
pub struct CNet {
    pub conv4: ConvTranspose1d,
    /// Bottleneck in: `d -> d / reduction`.
    pub fc6: Linear,
    /// Bottleneck out: `d / reduction -> d`.
    pub fc5: Linear,
    feature_dim: usize,
    modalities: usize,
    reduction: usize,
}

impl CNet {
    pub fn new<R: Rng>(
        feature_dim: usize,
        modalities: usize,
        reduction: usize,
        rng: &mut R,
    ) -> Result<CNet> {
        let (d, n) = (feature_dim, modalities);
        if n < 2 {
            return Err(Error::Config(format!(
                "channel fusion needs at least 2 modal positions, got {n}"
            )));
        }
        if reduction == 0 || d == 0 || d % reduction != 0 {
            return Err(Error::Config(format!(
                "feature dim {d} must be a positive multiple of the reduction ratio {reduction}"
            )));
        }
        // kernel 3, stride 1, padding 0: n -> n + 2, always an expansion.
        let conv4 = ConvTranspose1d::new(d, 3, 1, 0, rng)?;
        Ok(CNet {
            conv4,
            fc6: Linear::new(d, d / reduction, rng)?,
            fc5: Linear::new(d / reduction, d, rng)?,
            feature_dim: d,
            modalities: n,
            reduction,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn modalities(&self) -> usize {
        self.modalities
    }

    pub fn reduction(&self) -> usize {
        self.reduction
    }

    /// Modal positions after expansion.
    pub fn expanded_positions(&self) -> usize {
        self.modalities + 2
    }

    /// Expand, squeeze, excite, gate. Returns the channel-gated feature
    /// (row `c` of the input scaled by attention `c`) and the attention.
    pub fn forward(&self, g: &Graph, h: &Tensor) -> Result<(Tensor, AttentionVector)> {
        check_input("cnet_forward", h, self.feature_dim, self.modalities)?;
        let expanded = self.conv4.forward(g, h)?;
        let squeezed = g.global_avg_pool(&expanded)?;
        let hidden = g.relu(&self.fc6.forward(g, &squeezed)?)?;
        let attn = g.sigmoid(&self.fc5.forward(g, &hidden)?)?;
        let gated = g.scale_rows(h, &attn)?;
        Ok((gated, AttentionVector::new(attn)))
    }

    pub fn collect_params(&self, prefix: &str, out: &mut Vec<(String, Tensor)>) {
        self.conv4.collect_params(&format!("{prefix}.conv4"), out);
        self.fc6.collect_params(&format!("{prefix}.fc6"), out);
        self.fc5.collect_params(&format!("{prefix}.fc5"), out);
    }
}
