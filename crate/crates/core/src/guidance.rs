//! Score-combination rules.
//!
//! All combinators are affine in each ε argument and return the shared
//! value when their branches agree. No clamping or renormalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::score::ConditionEmbedding;

/// `u + ω·(c − u)`, returning `c` verbatim at `ω = 1`.
fn extrapolate(u: &Grid, c: &Grid, omega: f64) -> Result<Grid> {
    if omega == 1.0 {
        u.shape().ensure_eq(&c.shape())?;
        return Ok(c.clone());
    }
    u.zip_map(c, |u, c| u + omega * (c - u))
}

/// Classifier-free guidance: `ε(∅) + ω·(ε(C) − ε(∅))`.
pub fn cfg_combine(eps_uncond: &Grid, eps_cond: &Grid, omega: f64) -> Result<Grid> {
    extrapolate(eps_uncond, eps_cond, omega)
}

/// Negative guidance: `ε(C−) + ω_i·(ε(C+) − ε(C−))`. The negative branch may
/// come from a text condition or from extractor embeddings.
pub fn negative_combine(eps_neg: &Grid, eps_pos: &Grid, omega_i: f64) -> Result<Grid> {
    extrapolate(eps_neg, eps_pos, omega_i)
}

/// Two-scale guidance:
/// `ε(∅) + ω₊·(ε(C+) − ε(∅)) − ω₋·(ε(C−) − ε(∅))`.
pub fn dual_scale_combine(
    eps_base: &Grid,
    eps_pos: &Grid,
    eps_neg: &Grid,
    omega_plus: f64,
    omega_minus: f64,
) -> Result<Grid> {
    eps_base.shape().ensure_eq(&eps_pos.shape())?;
    eps_base.shape().ensure_eq(&eps_neg.shape())?;
    let data = eps_base
        .data()
        .iter()
        .zip(eps_pos.data())
        .zip(eps_neg.data())
        .map(|((&b, &p), &n)| b + omega_plus * (p - b) - omega_minus * (n - b))
        .collect();
    Grid::from_vec(eps_base.shape(), data)
}

/// Negative embedding from the content image's style features and the style
/// image's content features. Slots are stored verbatim.
pub fn build_negative_embedding(
    style_of_content: Vec<f64>,
    content_of_style: Vec<f64>,
    style_dim: usize,
    content_dim: usize,
) -> Result<ConditionEmbedding> {
    if style_of_content.len() != style_dim || content_of_style.len() != content_dim {
        return Err(Error::ShapeMismatch {
            expected: format!("slots ({style_dim}, {content_dim})"),
            found: format!("({}, {})", style_of_content.len(), content_of_style.len()),
        });
    }
    ConditionEmbedding::new(style_of_content, content_of_style)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceMode {
    /// ε(C+) only.
    #[default]
    None,
    /// ε(∅) vs ε(C+) at `omega`.
    Cfg,
    /// ε(C−) vs ε(C+) at `omega_i`.
    Negative,
    /// ε(∅), ε(C+), ε(C−) at `omega_plus` / `omega_minus`.
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceConfig {
    pub mode: GuidanceMode,
    pub omega: f64,
    pub omega_i: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub positive: ConditionEmbedding,
    pub negative: ConditionEmbedding,
}

impl GuidanceConfig {
    /// Unguided: every prediction uses `positive`.
    pub fn none(positive: ConditionEmbedding, negative: ConditionEmbedding) -> Self {
        Self {
            mode: GuidanceMode::None,
            omega: 1.0,
            omega_i: 1.0,
            omega_plus: 1.0,
            omega_minus: 0.0,
            positive,
            negative,
        }
    }

    pub fn cfg(positive: ConditionEmbedding, negative: ConditionEmbedding, omega: f64) -> Self {
        Self {
            mode: GuidanceMode::Cfg,
            omega,
            ..Self::none(positive, negative)
        }
    }

    pub fn negative(
        positive: ConditionEmbedding,
        negative: ConditionEmbedding,
        omega_i: f64,
    ) -> Self {
        Self {
            mode: GuidanceMode::Negative,
            omega_i,
            ..Self::none(positive, negative)
        }
    }

    pub fn dual(
        positive: ConditionEmbedding,
        negative: ConditionEmbedding,
        omega_plus: f64,
        omega_minus: f64,
    ) -> Self {
        Self {
            mode: GuidanceMode::Dual,
            omega_plus,
            omega_minus,
            ..Self::none(positive, negative)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega),
            ("omega_i", self.omega_i),
            ("omega_plus", self.omega_plus),
            ("omega_minus", self.omega_minus),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}
