//! Ablation variants.
//!
//! Two families: the B series toggles modalities, the two fusion nets, and
//! the multi-modal loss; the A series contrasts plain squeeze-excitation
//! attention against the expansion-based nets at each fusion site (all A
//! variants use both modalities and the multi-modal loss).
//!
//! ```text
//! id  rgb skel  modal-site      channel-site    loss
//! B1   x   .    -               -               plain CE on the RGB head
//! B2   .   x    -               -               plain CE on the skeleton head
//! B3   x   x    -               -               plain CE on a concat head
//! B4   x   x    ESE             -               multi-modal
//! B5   x   x    -               ESE             multi-modal
//! B6   x   x    ESE             ESE             fused-head only (1.0, 0)
//! B7   x   x    ESE             ESE             multi-modal
//! A1   x   x    -               SE              multi-modal
//! A2   x   x    SE              -               multi-modal
//! A3   x   x    SE              SE              multi-modal
//! A4   x   x    -               ESE             multi-modal
//! A5   x   x    ESE             -               multi-modal
//! A6   x   x    ESE             ESE             multi-modal
//! ```

use std::fmt;
use std::str::FromStr;

use esefn::nn::{Linear, Mlp};
use esefn::{
    AttentionKind, BatchObjective, EseFn, EseFnConfig, Error, Graph, LossBreakdown, LossWeights,
    Modality, Model, MultiModalFeature, Result, Tensor, TestAccuracies,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariantId {
    B1,
    B2,
    B3,
    B4,
    B5,
    B6,
    B7,
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
}

impl VariantId {
    /// Every variant, in table row order (B series, then A series).
    pub const ALL: [VariantId; 13] = [
        VariantId::B1,
        VariantId::B2,
        VariantId::B3,
        VariantId::B4,
        VariantId::B5,
        VariantId::B6,
        VariantId::B7,
        VariantId::A1,
        VariantId::A2,
        VariantId::A3,
        VariantId::A4,
        VariantId::A5,
        VariantId::A6,
    ];
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for VariantId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        VariantId::ALL
            .into_iter()
            .find(|v| format!("{v:?}") == up)
            .ok_or_else(|| format!("unknown variant '{s}'; expected B1..B7 or A1..A6"))
    }
}

/// Component flags of one variant, mirroring the ablation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationVariant {
    pub id: VariantId,
    pub uses_rgb: bool,
    pub uses_skeleton: bool,
    pub uses_mnet: bool,
    pub uses_cnet: bool,
    pub uses_ml: bool,
    /// False where a fusion site holds a plain squeeze-excitation block
    /// (or the variant has no fusion at all).
    pub uses_expansion: bool,
}

impl AblationVariant {
    pub fn of(id: VariantId) -> AblationVariant {
        use VariantId::*;
        let f = |uses_rgb, uses_skeleton, uses_mnet, uses_cnet, uses_ml, uses_expansion| {
            AblationVariant {
                id,
                uses_rgb,
                uses_skeleton,
                uses_mnet,
                uses_cnet,
                uses_ml,
                uses_expansion,
            }
        };
        match id {
            B1 => f(true, false, false, false, false, false),
            B2 => f(false, true, false, false, false, false),
            B3 => f(true, true, false, false, false, false),
            B4 => f(true, true, true, false, true, true),
            B5 => f(true, true, false, true, true, true),
            B6 => f(true, true, true, true, false, true),
            B7 => f(true, true, true, true, true, true),
            A1 => f(true, true, false, true, true, false),
            A2 => f(true, true, true, false, true, false),
            A3 => f(true, true, true, true, true, false),
            A4 => f(true, true, false, true, true, true),
            A5 => f(true, true, true, false, true, true),
            A6 => f(true, true, true, true, true, true),
        }
    }
}

/// A variant instantiated as a trainable model plus its loss weights.
pub struct VariantModel {
    pub variant: AblationVariant,
    pub model: Box<dyn Model>,
    pub weights: LossWeights,
}

/// Builds the model for a variant. All variants draw their initial
/// parameters from a generator seeded identically, so two variants with the
/// same architecture start from the same values.
pub fn build_variant(
    id: VariantId,
    dim_r: usize,
    dim_s: usize,
    fused_dim: usize,
    classes: usize,
    seed: u64,
    weights: LossWeights,
) -> Result<VariantModel> {
    let variant = AblationVariant::of(id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plain = LossWeights::fused_only(1.0)?;

    let (model, weights): (Box<dyn Model>, LossWeights) = match id {
        VariantId::B1 => (
            Box::new(SingleModalBaseline::new(
                Modality::Rgb,
                dim_r,
                dim_s,
                classes,
                &mut rng,
            )?),
            plain,
        ),
        VariantId::B2 => (
            Box::new(SingleModalBaseline::new(
                Modality::Skeleton,
                dim_r,
                dim_s,
                classes,
                &mut rng,
            )?),
            plain,
        ),
        VariantId::B3 => (
            Box::new(ConcatBaseline::new(dim_r, dim_s, fused_dim, classes, &mut rng)?),
            plain,
        ),
        VariantId::B6 => (
            Box::new(fusion_model(&variant, dim_r, dim_s, fused_dim, classes, &mut rng)?),
            plain,
        ),
        _ => (
            Box::new(fusion_model(&variant, dim_r, dim_s, fused_dim, classes, &mut rng)?),
            weights,
        ),
    };
    Ok(VariantModel {
        variant,
        model,
        weights,
    })
}

fn fusion_model(
    variant: &AblationVariant,
    dim_r: usize,
    dim_s: usize,
    fused_dim: usize,
    classes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EseFn> {
    let site = |used: bool| -> Option<AttentionKind> {
        match (used, variant.uses_expansion) {
            (false, _) => None,
            (true, true) => Some(AttentionKind::Ese),
            (true, false) => Some(AttentionKind::SqueezeExcite),
        }
    };
    let mut config = EseFnConfig::new(dim_r, dim_s, fused_dim, classes);
    config.modal = site(variant.uses_mnet);
    config.channel = site(variant.uses_cnet);
    EseFn::new(&config, rng)
}

fn sample_tensors(sample: &MultiModalFeature) -> Result<(Tensor, Tensor)> {
    Ok((
        Tensor::from_vec(&[sample.f_r.len()], sample.f_r.clone())?,
        Tensor::from_vec(&[sample.f_s.len()], sample.f_s.clone())?,
    ))
}

/// Plain cross-entropy on one modality's head; the B1/B2 baselines.
pub struct SingleModalBaseline {
    head: Linear,
    modality: Modality,
    dim_r: usize,
    dim_s: usize,
}

impl SingleModalBaseline {
    pub fn new(
        modality: Modality,
        dim_r: usize,
        dim_s: usize,
        classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<SingleModalBaseline> {
        let in_dim = match modality {
            Modality::Rgb => dim_r,
            Modality::Skeleton => dim_s,
        };
        Ok(SingleModalBaseline {
            head: Linear::new(in_dim, classes, rng)?,
            modality,
            dim_r,
            dim_s,
        })
    }

    fn logits(&self, g: &Graph, sample: &MultiModalFeature) -> Result<Tensor> {
        let (f_r, f_s) = sample_tensors(sample)?;
        let input = match self.modality {
            Modality::Rgb => f_r,
            Modality::Skeleton => f_s,
        };
        self.head.forward(g, &input)
    }
}

impl Model for SingleModalBaseline {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.head.collect_params("head", &mut out);
        out
    }

    fn feature_dims(&self) -> (usize, usize) {
        (self.dim_r, self.dim_s)
    }

    fn batch_objective(
        &self,
        batch: &[MultiModalFeature],
        _weights: &LossWeights,
    ) -> Result<BatchObjective> {
        if batch.is_empty() {
            return Err(Error::Input("batch must not be empty".to_string()));
        }
        let g = Graph::new();
        let mut per_sample = Vec::with_capacity(batch.len());
        for sample in batch {
            let logits = self.logits(&g, sample)?;
            per_sample.push(g.softmax_cross_entropy(&logits, sample.label)?);
        }
        let loss = g.mean(&per_sample)?;
        let value = loss.item()?;
        Ok(BatchObjective {
            graph: g,
            total: loss,
            breakdown: LossBreakdown {
                l_r: value,
                l_s: value,
                l_rs: value,
                l_total: value,
                min_branch: self.modality,
            },
        })
    }

    fn primary_logits(&self, g: &Graph, sample: &MultiModalFeature) -> Result<Tensor> {
        self.logits(g, sample)
    }

    fn test_accuracies(&self, data: &[MultiModalFeature]) -> Result<TestAccuracies> {
        let acc = Some(esefn::primary_accuracy(self, data)?);
        Ok(match self.modality {
            Modality::Rgb => TestAccuracies {
                rgb: acc,
                ..Default::default()
            },
            Modality::Skeleton => TestAccuracies {
                skeleton: acc,
                ..Default::default()
            },
        })
    }
}

/// Projected features concatenated into one softmax head; the B3 baseline.
pub struct ConcatBaseline {
    proj_r: Mlp,
    proj_s: Mlp,
    head: Linear,
    dim_r: usize,
    dim_s: usize,
}

impl ConcatBaseline {
    pub fn new(
        dim_r: usize,
        dim_s: usize,
        fused_dim: usize,
        classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<ConcatBaseline> {
        Ok(ConcatBaseline {
            proj_r: Mlp::new(dim_r, fused_dim, rng)?,
            proj_s: Mlp::new(dim_s, fused_dim, rng)?,
            head: Linear::new(2 * fused_dim, classes, rng)?,
            dim_r,
            dim_s,
        })
    }

    fn logits(&self, g: &Graph, sample: &MultiModalFeature) -> Result<Tensor> {
        let (f_r, f_s) = sample_tensors(sample)?;
        let a = self.proj_r.forward(g, &f_r)?;
        let b = self.proj_s.forward(g, &f_s)?;
        let joined = g.concat_vecs(&[&a, &b])?;
        self.head.forward(g, &joined)
    }
}

impl Model for ConcatBaseline {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        self.proj_r.collect_params("proj_r", &mut out);
        self.proj_s.collect_params("proj_s", &mut out);
        self.head.collect_params("head", &mut out);
        out
    }

    fn feature_dims(&self) -> (usize, usize) {
        (self.dim_r, self.dim_s)
    }

    fn batch_objective(
        &self,
        batch: &[MultiModalFeature],
        _weights: &LossWeights,
    ) -> Result<BatchObjective> {
        if batch.is_empty() {
            return Err(Error::Input("batch must not be empty".to_string()));
        }
        let g = Graph::new();
        let mut per_sample = Vec::with_capacity(batch.len());
        for sample in batch {
            let logits = self.logits(&g, sample)?;
            per_sample.push(g.softmax_cross_entropy(&logits, sample.label)?);
        }
        let loss = g.mean(&per_sample)?;
        let value = loss.item()?;
        Ok(BatchObjective {
            graph: g,
            total: loss,
            breakdown: LossBreakdown {
                l_r: value,
                l_s: value,
                l_rs: value,
                l_total: value,
                min_branch: Modality::Rgb,
            },
        })
    }

    fn primary_logits(&self, g: &Graph, sample: &MultiModalFeature) -> Result<Tensor> {
        self.logits(g, sample)
    }
}

/// The accuracy a variant reports in the ablation table: its single head
/// for B1/B2, the fused head otherwise.
pub fn reported_accuracy(variant: &AblationVariant, acc: &TestAccuracies) -> Option<f64> {
    match variant.id {
        VariantId::B1 => acc.rgb,
        VariantId::B2 => acc.skeleton,
        _ => acc.fused,
    }
}
