//! The multi-modal training objective.
//!
//! Three cross-entropy losses are in play: one per single-modality head and
//! one for the fused head. The combined objective is
//!
//! ```text
//! total = alpha * l_fused + beta * (min(l_rgb, l_skel) - l_fused)
//! ```
//!
//! which rewards the fused head directly (weight `alpha - beta`) while
//! pulling the *better* single-modality branch along (weight `beta`). With
//! `beta = 0` it degrades to plain fused-head training. `alpha > beta` is
//! required: otherwise the fused coefficient goes non-positive and the
//! objective would push the fused loss up.

use crate::data::Modality;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Selected, Tensor};

/// Validated loss hyper-parameters with `alpha > beta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    alpha: f64,
    beta: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<LossWeights> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Config(format!(
                "loss weights must be finite, got alpha={alpha}, beta={beta}"
            )));
        }
        if !(beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta must be >= 0, got {beta}"
            )));
        }
        if !(alpha > beta) {
            return Err(Error::Config(format!(
                "alpha must exceed beta so the fused coefficient alpha - beta stays \
                 positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(LossWeights { alpha, beta })
    }

    /// Plain fused-head training: `total = alpha * l_fused`.
    pub fn fused_only(alpha: f64) -> Result<LossWeights> {
        LossWeights::new(alpha, 0.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for LossWeights {
    /// The operating point used throughout: `alpha = 0.7`, `beta = 0.3`.
    fn default() -> Self {
        LossWeights {
            alpha: 0.7,
            beta: 0.3,
        }
    }
}

/// The scalar pieces of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub l_r: f64,
    pub l_s: f64,
    pub l_rs: f64,
    pub l_total: f64,
    /// Which single-modality loss was the minimum; ties go to RGB.
    pub min_branch: Modality,
}

/// Combines the three scalar losses into the training objective on the
/// graph, so gradients flow with coefficient `alpha - beta` into the fused
/// loss and `beta` into the selected (minimum) single-modality loss only.
pub fn multimodal_loss(
    g: &Graph,
    l_r: &Tensor,
    l_s: &Tensor,
    l_rs: &Tensor,
    w: &LossWeights,
) -> Result<(Tensor, LossBreakdown)> {
    for (name, l) in [("l_r", l_r), ("l_s", l_s), ("l_rs", l_rs)] {
        let v = l.item()?;
        if v < 0.0 {
            return Err(Error::Input(format!(
                "{name} must be non-negative, got {v}"
            )));
        }
    }
    let (min_single, picked) = g.min2(l_r, l_s)?;
    let min_branch = match picked {
        Selected::Left => Modality::Rgb,
        Selected::Right => Modality::Skeleton,
    };
    let gap = g.sub(&min_single, l_rs)?;
    let total = g.add(&g.scale(l_rs, w.alpha())?, &g.scale(&gap, w.beta())?)?;
    let breakdown = LossBreakdown {
        l_r: l_r.item()?,
        l_s: l_s.item()?,
        l_rs: l_rs.item()?,
        l_total: total.item()?,
        min_branch,
    };
    Ok((total, breakdown))
}

/// A built forward pass over one batch, ready for `graph.backward(&total)`.
pub struct BatchObjective {
    pub graph: Graph,
    pub total: Tensor,
    pub breakdown: LossBreakdown,
}
