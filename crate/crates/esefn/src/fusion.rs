//! The end-to-end fusion classifier.
//!
//! Pipeline for a sample `(f_r, f_s)`:
//!
//! 1. project each modality to the shared width `d` with its own MLP;
//! 2. stack the projections as the columns of a `[d, 2]` feature;
//! 3. modal-wise fusion on the transposed `[2, d]` view (each modality row
//!    gated by one attention weight);
//! 4. channel-wise fusion back on the `[d, 2]` view (each feature row gated
//!    by one attention weight);
//! 5. sum over the modal axis into the fused vector `f_rs` of length `d`.
//!
//! Classification heads read the *raw* modality features (`head_r`,
//! `head_s`) and the fused vector (`head_rs`). Either fusion site can hold
//! the full expansion-squeeze-excitation net, a plain squeeze-excitation
//! block, or nothing at all; ablation studies toggle exactly these choices.

use rand::Rng;

use crate::attention::{AttentionVector, CNet, MNet, SeBlock};
use crate::data::MultiModalFeature;
use crate::error::{Error, Result};
use crate::loss::{multimodal_loss, BatchObjective, LossBreakdown, LossWeights};
use crate::nn::{Linear, Mlp};
use crate::tensor::{Graph, Tensor};
use crate::train::{Model, TestAccuracies};

/// The pipeline always fuses exactly two modalities.
pub const MODALITIES: usize = 2;

/// Which attention to place at a fusion site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    /// Plain squeeze-excitation: pool the site input directly.
    SqueezeExcite,
    /// Expansion-squeeze-excitation: convolutional expansion first.
    Ese,
}

/// Model shape: dims, class count, and what sits at each fusion site.
#[derive(Debug, Clone)]
pub struct EseFnConfig {
    /// First-modality feature width `d1`.
    pub dim_r: usize,
    /// Second-modality feature width `d2`.
    pub dim_s: usize,
    /// Shared projection width `d`.
    pub fused_dim: usize,
    /// Class count `k`.
    pub classes: usize,
    pub modal: Option<AttentionKind>,
    pub channel: Option<AttentionKind>,
    /// Bottleneck ratio of the modal ESE net.
    pub mnet_reduction: usize,
    /// Bottleneck ratio of the channel ESE net.
    pub cnet_reduction: usize,
    /// Bottleneck ratio of substituted squeeze-excitation blocks.
    pub se_reduction: usize,
}

impl EseFnConfig {
    /// The full model: ESE attention at both fusion sites.
    pub fn new(dim_r: usize, dim_s: usize, fused_dim: usize, classes: usize) -> EseFnConfig {
        EseFnConfig {
            dim_r,
            dim_s,
            fused_dim,
            classes,
            modal: Some(AttentionKind::Ese),
            channel: Some(AttentionKind::Ese),
            mnet_reduction: 2,
            cnet_reduction: 4,
            se_reduction: 2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim_r == 0 || self.dim_s == 0 || self.fused_dim == 0 {
            return Err(Error::Config(format!(
                "feature dims must be positive, got d1={}, d2={}, d={}",
                self.dim_r, self.dim_s, self.fused_dim
            )));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        Ok(())
    }
}

/// Attention at the modal site, acting on `[2, d]`.
#[derive(Debug, Clone)]
pub enum ModalFusion {
    Se(SeBlock),
    Ese(MNet),
}

/// Attention at the channel site, acting on `[d, 2]`.
#[derive(Debug, Clone)]
pub enum ChannelFusion {
    Se(SeBlock),
    Ese(CNet),
}

/// Per-head logits for one sample.
pub struct Logits {
    pub rgb: Tensor,
    pub skeleton: Tensor,
    pub fused: Tensor,
}

/// Output of the fusion pipeline for one sample.
pub struct Fused {
    /// The fused feature `f_rs`, length `d`.
    pub fused: Tensor,
    pub modal_attention: Option<AttentionVector>,
    pub channel_attention: Option<AttentionVector>,
}

/// The fusion classifier: projections, fusion sites, and three heads.
#[derive(Debug, Clone)]
pub struct EseFn {
    pub proj_r: Mlp,
    pub proj_s: Mlp,
    pub modal: Option<ModalFusion>,
    pub channel: Option<ChannelFusion>,
    pub head_r: Linear,
    pub head_s: Linear,
    pub head_rs: Linear,
    config: EseFnConfig,
}

impl EseFn {
    /// Builds a freshly initialized model. Site constraints (`d > 8` for
    /// the modal ESE net, divisibility by the bottleneck ratios) are
    /// enforced here, not at forward time.
    pub fn new<R: Rng>(config: &EseFnConfig, rng: &mut R) -> Result<EseFn> {
        config.validate()?;
        let d = config.fused_dim;
        let proj_r = Mlp::new(config.dim_r, d, rng)?;
        let proj_s = Mlp::new(config.dim_s, d, rng)?;
        let modal = match config.modal {
            None => None,
            Some(AttentionKind::SqueezeExcite) => Some(ModalFusion::Se(SeBlock::new(
                MODALITIES,
                config.se_reduction,
                rng,
            )?)),
            Some(AttentionKind::Ese) => Some(ModalFusion::Ese(MNet::new(
                MODALITIES,
                d,
                config.mnet_reduction,
                rng,
            )?)),
        };
        let channel = match config.channel {
            None => None,
            Some(AttentionKind::SqueezeExcite) => {
                Some(ChannelFusion::Se(SeBlock::new(d, config.se_reduction, rng)?))
            }
            Some(AttentionKind::Ese) => Some(ChannelFusion::Ese(CNet::new(
                d,
                MODALITIES,
                config.cnet_reduction,
                rng,
            )?)),
        };
        Ok(EseFn {
            proj_r,
            proj_s,
            modal,
            channel,
            head_r: Linear::new(config.dim_r, config.classes, rng)?,
            head_s: Linear::new(config.dim_s, config.classes, rng)?,
            head_rs: Linear::new(d, config.classes, rng)?,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &EseFnConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    fn check_inputs(&self, f_r: &Tensor, f_s: &Tensor) -> Result<()> {
        if f_r.dims() != [self.config.dim_r] || f_s.dims() != [self.config.dim_s] {
            return Err(Error::Input(format!(
                "feature dims {:?} / {:?} do not match the model ({} / {})",
                f_r.dims(),
                f_s.dims(),
                self.config.dim_r,
                self.config.dim_s
            )));
        }
        Ok(())
    }

    /// Runs the fusion pipeline on one sample's feature vectors.
    pub fn fuse_forward(&self, g: &Graph, f_r: &Tensor, f_s: &Tensor) -> Result<Fused> {
        self.check_inputs(f_r, f_s)?;
        let a = self.proj_r.forward(g, f_r)?;
        let b = self.proj_s.forward(g, f_s)?;
        let f = g.concat_cols(&[&a, &b])?; // [d, 2]

        let modal_view = g.transpose(&f)?; // [2, d]
        let (modal_fused, modal_attention) = match &self.modal {
            None => (modal_view, None),
            Some(ModalFusion::Se(se)) => {
                let (h, w) = se.forward(g, &modal_view)?;
                (h, Some(w))
            }
            Some(ModalFusion::Ese(mnet)) => {
                let (h, w) = mnet.forward(g, &modal_view)?;
                (h, Some(w))
            }
        };

        let channel_view = g.transpose(&modal_fused)?; // [d, 2]
        let (channel_fused, channel_attention) = match &self.channel {
            None => (channel_view, None),
            Some(ChannelFusion::Se(se)) => {
                let (h, w) = se.forward(g, &channel_view)?;
                (h, Some(w))
            }
            Some(ChannelFusion::Ese(cnet)) => {
                let (h, w) = cnet.forward(g, &channel_view)?;
                (h, Some(w))
            }
        };

        Ok(Fused {
            fused: g.row_sums(&channel_fused)?,
            modal_attention,
            channel_attention,
        })
    }

    /// Logits of all three heads. The single-modality heads read the raw
    /// (unprojected) features.
    pub fn predict(&self, g: &Graph, f_r: &Tensor, f_s: &Tensor) -> Result<Logits> {
        let fused = self.fuse_forward(g, f_r, f_s)?;
        Ok(Logits {
            rgb: self.head_r.forward(g, f_r)?,
            skeleton: self.head_s.forward(g, f_s)?,
            fused: self.head_rs.forward(g, &fused.fused)?,
        })
    }

    /// Builds the batch objective: per-head cross-entropies averaged over
    /// the batch, combined by [`multimodal_loss`].
    pub fn batch_objective(
        &self,
        batch: &[MultiModalFeature],
        weights: &LossWeights,
    ) -> Result<BatchObjective> {
        if batch.is_empty() {
            return Err(Error::Input("batch must not be empty".to_string()));
        }
        let g = Graph::new();
        let mut per_r = Vec::with_capacity(batch.len());
        let mut per_s = Vec::with_capacity(batch.len());
        let mut per_rs = Vec::with_capacity(batch.len());
        for sample in batch {
            let f_r = Tensor::from_vec(&[sample.f_r.len()], sample.f_r.clone())?;
            let f_s = Tensor::from_vec(&[sample.f_s.len()], sample.f_s.clone())?;
            let logits = self.predict(&g, &f_r, &f_s)?;
            per_r.push(g.softmax_cross_entropy(&logits.rgb, sample.label)?);
            per_s.push(g.softmax_cross_entropy(&logits.skeleton, sample.label)?);
            per_rs.push(g.softmax_cross_entropy(&logits.fused, sample.label)?);
        }
        let l_r = g.mean(&per_r)?;
        let l_s = g.mean(&per_s)?;
        let l_rs = g.mean(&per_rs)?;
        let (total, breakdown) = multimodal_loss(&g, &l_r, &l_s, &l_rs, weights)?;
        Ok(BatchObjective {
            graph: g,
            total,
            breakdown,
        })
    }

    /// Batch objective plus a backward pass: every parameter's gradient
    /// buffer is populated in one sweep.
    pub fn batch_loss(
        &self,
        batch: &[MultiModalFeature],
        weights: &LossWeights,
    ) -> Result<LossBreakdown> {
        let obj = self.batch_objective(batch, weights)?;
        obj.graph.backward(&obj.total)?;
        Ok(obj.breakdown)
    }

    /// Writes every parameter to a checkpoint file.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::checkpoint::save_checkpoint(&self.named_params(), path)
    }

    /// Rebuilds a model from a checkpoint written by [`EseFn::save`].
    ///
    /// The file stores only named tensors, so the configuration is
    /// recovered from them: head shapes give the dims and class count,
    /// parameter name prefixes identify what sits at each fusion site, and
    /// bottleneck shapes give the reduction ratios. Loaded predictions
    /// match the saved model exactly.
    pub fn from_checkpoint(path: &std::path::Path) -> Result<EseFn> {
        use rand::SeedableRng;

        let entries = crate::checkpoint::load_checkpoint(path)?;
        let dims_of = |name: &str| -> Result<&[usize]> {
            entries
                .iter()
                .find(|e| e.name == name)
                .map(|e| e.dims.as_slice())
                .ok_or_else(|| Error::Input(format!("checkpoint is missing tensor '{name}'")))
        };
        let head_dims = |name: &str| -> Result<(usize, usize)> {
            match dims_of(name)? {
                [k, d] => Ok((*k, *d)),
                d => Err(Error::Input(format!(
                    "checkpoint tensor '{name}' should be a rank-2 head weight, got dims {d:?}"
                ))),
            }
        };
        let (classes, dim_r) = head_dims("head_r.weight")?;
        let (_, dim_s) = head_dims("head_s.weight")?;
        let (_, fused_dim) = head_dims("head_rs.weight")?;

        let has = |name: &str| entries.iter().any(|e| e.name == name);
        let bottleneck_ratio = |weight: &str, full: usize| -> Result<usize> {
            match dims_of(weight)? {
                [reduced, input] if *input == full && *reduced > 0 && full % *reduced == 0 => {
                    Ok(full / *reduced)
                }
                d => Err(Error::Input(format!(
                    "checkpoint tensor '{weight}' dims {d:?} do not form a bottleneck of {full}"
                ))),
            }
        };

        let mut config = EseFnConfig::new(dim_r, dim_s, fused_dim, classes);
        config.modal = if has("mnet.conv3.weight") {
            config.mnet_reduction = bottleneck_ratio("mnet.fc4.weight", 8 * MODALITIES)?;
            Some(AttentionKind::Ese)
        } else if has("modal_se.fc_reduce.weight") {
            config.se_reduction = bottleneck_ratio("modal_se.fc_reduce.weight", MODALITIES)?;
            Some(AttentionKind::SqueezeExcite)
        } else {
            None
        };
        config.channel = if has("cnet.conv4.weight") {
            config.cnet_reduction = bottleneck_ratio("cnet.fc6.weight", fused_dim)?;
            Some(AttentionKind::Ese)
        } else if has("channel_se.fc_reduce.weight") {
            let r = bottleneck_ratio("channel_se.fc_reduce.weight", fused_dim)?;
            if matches!(config.modal, Some(AttentionKind::SqueezeExcite))
                && r != config.se_reduction
            {
                return Err(Error::Input(format!(
                    "checkpoint mixes squeeze-excitation ratios {} and {r}",
                    config.se_reduction
                )));
            }
            config.se_reduction = r;
            Some(AttentionKind::SqueezeExcite)
        } else {
            None
        };

        // Build the structure through the ordinary constructor (all
        // invariants enforced), then overwrite every value by name.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let model = EseFn::new(&config, &mut rng)?;
        let params = model.named_params();
        if params.len() != entries.len() {
            return Err(Error::Input(format!(
                "checkpoint holds {} tensors, the inferred model has {}",
                entries.len(),
                params.len()
            )));
        }
        for (name, tensor) in &params {
            let entry = entries
                .iter()
                .find(|e| &e.name == name)
                .ok_or_else(|| Error::Input(format!("checkpoint is missing tensor '{name}'")))?;
            if entry.dims != tensor.dims() {
                return Err(Error::Input(format!(
                    "checkpoint tensor '{name}' has dims {:?}, model expects {:?}",
                    entry.dims,
                    tensor.dims()
                )));
            }
            tensor.set_values(&entry.values)?;
        }
        Ok(model)
    }

    /// All parameters, named, in a fixed structural order.
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.proj_r.collect_params("proj_r", &mut out);
        self.proj_s.collect_params("proj_s", &mut out);
        match &self.modal {
            None => {}
            Some(ModalFusion::Se(se)) => se.collect_params("modal_se", &mut out),
            Some(ModalFusion::Ese(mnet)) => mnet.collect_params("mnet", &mut out),
        }
        match &self.channel {
            None => {}
            Some(ChannelFusion::Se(se)) => se.collect_params("channel_se", &mut out),
            Some(ChannelFusion::Ese(cnet)) => cnet.collect_params("cnet", &mut out),
        }
        self.head_r.collect_params("head_r", &mut out);
        self.head_s.collect_params("head_s", &mut out);
        self.head_rs.collect_params("head_rs", &mut out);
        out
    }
}

impl Model for EseFn {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        EseFn::named_params(self)
    }

    fn feature_dims(&self) -> (usize, usize) {
        (self.config.dim_r, self.config.dim_s)
    }

    fn batch_objective(
        &self,
        batch: &[MultiModalFeature],
        weights: &LossWeights,
    ) -> Result<BatchObjective> {
        EseFn::batch_objective(self, batch, weights)
    }

    fn primary_logits(&self, g: &Graph, sample: &MultiModalFeature) -> Result<Tensor> {
        let f_r = Tensor::from_vec(&[sample.f_r.len()], sample.f_r.clone())?;
        let f_s = Tensor::from_vec(&[sample.f_s.len()], sample.f_s.clone())?;
        Ok(self.predict(g, &f_r, &f_s)?.fused)
    }

    fn test_accuracies(&self, data: &[MultiModalFeature]) -> Result<TestAccuracies> {
        if data.is_empty() {
            return Ok(TestAccuracies::default());
        }
        let mut correct = [0usize; 3];
        for sample in data {
            let g = Graph::new();
            let f_r = Tensor::from_vec(&[sample.f_r.len()], sample.f_r.clone())?;
            let f_s = Tensor::from_vec(&[sample.f_s.len()], sample.f_s.clone())?;
            let logits = self.predict(&g, &f_r, &f_s)?;
            let heads = [&logits.rgb, &logits.skeleton, &logits.fused];
            for (slot, t) in correct.iter_mut().zip(heads) {
                if crate::train::argmax_lowest(&t.values()) == sample.label {
                    *slot += 1;
                }
            }
        }
        let n = data.len() as f64;
        Ok(TestAccuracies {
            rgb: Some(correct[0] as f64 / n),
            skeleton: Some(correct[1] as f64 / n),
            fused: Some(correct[2] as f64 / n),
        })
    }
}
