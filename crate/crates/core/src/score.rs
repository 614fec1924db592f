//! ε-prediction models.
//!
//! The analytic models here are Gaussian mixtures whose noised marginals are
//! known in closed form, so their ε-predictions are exact:
//! a component `N(μ, s²I)` noised to level ᾱ has marginal
//! `N(√ᾱ·μ, (ᾱ·s² + 1 − ᾱ)·I)` and
//! `ε̂ = −√(1−ᾱ)·∇log p = √(1−ᾱ)·(z − √ᾱ·μ) / (ᾱ·s² + 1 − ᾱ)`.
//! Mixtures weight the component predictions by posterior responsibility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_content, extract_style};
use crate::grid::{Grid, Shape};
use crate::schedule::NoiseSchedule;

/// Condition vector with a style slot and a content slot. The null condition
/// (∅) has both slots zero and `null_flag` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEmbedding {
    style_slot: Vec<f64>,
    content_slot: Vec<f64>,
    null_flag: bool,
}

impl ConditionEmbedding {
    pub fn new(style_slot: Vec<f64>, content_slot: Vec<f64>) -> Result<Self> {
        if style_slot
            .iter()
            .chain(&content_slot)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("condition embedding"));
        }
        Ok(Self {
            style_slot,
            content_slot,
            null_flag: false,
        })
    }

    pub fn null(style_dim: usize, content_dim: usize) -> Self {
        Self {
            style_slot: vec![0.0; style_dim],
            content_slot: vec![0.0; content_dim],
            null_flag: true,
        }
    }

    /// Embedding of an image: its style and content features.
    pub fn of_image(img: &Grid) -> Result<Self> {
        Self::new(extract_style(img)?, extract_content(img)?)
    }

    pub fn is_null(&self) -> bool {
        self.null_flag
    }

    pub fn style_slot(&self) -> &[f64] {
        &self.style_slot
    }

    pub fn content_slot(&self) -> &[f64] {
        &self.content_slot
    }

    /// Equal slot values, ignoring the null flag.
    pub fn same_values(&self, other: &Self) -> bool {
        self.style_slot == other.style_slot && self.content_slot == other.content_slot
    }

    /// Copy with the style slot replaced.
    pub fn with_style(&self, style_slot: Vec<f64>) -> Result<Self> {
        Self::new(style_slot, self.content_slot.clone())
    }

    fn dims(&self) -> (usize, usize) {
        (self.style_slot.len(), self.content_slot.len())
    }
}

/// Which condition slots a model consults when matching a condition.
/// `StyleOnly` is the style-injection mode used while sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMatch {
    #[default]
    Full,
    StyleOnly,
}

/// ε_θ(z, ᾱ, C). Implementations must be deterministic.
pub trait ScoreModel: Send + Sync {
    fn shape(&self) -> Shape;

    /// Noise prediction at noise level `alpha_bar`.
    fn eps(
        &self,
        z: &Grid,
        alpha_bar: f64,
        cond: &ConditionEmbedding,
        slots: SlotMatch,
    ) -> Result<Grid>;

    fn null_condition(&self) -> ConditionEmbedding;
}

/// ε prediction at sampling step `k` of `schedule`.
pub fn predict_eps(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    z: &Grid,
    k: usize,
    cond: &ConditionEmbedding,
) -> Result<Grid> {
    model.eps(z, schedule.alpha_bar_at(k)?, cond, SlotMatch::Full)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub mean: Grid,
    pub scale: f64,
    pub weight: f64,
}

/// Isotropic Gaussian mixture with weights normalized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

fn check_alpha_bar(alpha_bar: f64) -> Result<()> {
    if !(alpha_bar > 0.0 && alpha_bar <= 1.0) {
        return Err(Error::invalid(format!(
            "alpha_bar must be in (0, 1], got {alpha_bar}"
        )));
    }
    Ok(())
}

impl GaussianMixture {
    /// Weights must be positive and sum to 1 within 1e-9; they are then
    /// renormalized exactly.
    pub fn new(mut components: Vec<GaussianComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("mixture needs at least one component"))?;
        let shape = first.mean.shape();
        for c in &components {
            shape.ensure_eq(&c.mean.shape())?;
            if !(c.scale.is_finite() && c.scale > 0.0) {
                return Err(Error::invalid(format!(
                    "component scale must be positive, got {}",
                    c.scale
                )));
            }
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(Error::invalid(format!(
                    "component weight must be positive, got {}",
                    c.weight
                )));
            }
            if !c.mean.is_finite() {
                return Err(Error::NonFinite("component mean"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        for c in components.iter_mut() {
            c.weight /= total;
        }
        Ok(Self { components })
    }

    pub fn isotropic(mean: Grid, scale: f64) -> Result<Self> {
        Self::new(vec![GaussianComponent {
            mean,
            scale,
            weight: 1.0,
        }])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn shape(&self) -> Shape {
        self.components[0].mean.shape()
    }

    /// Weighted mean of the component means.
    pub fn mean(&self) -> Grid {
        let mut acc = Grid::zeros(self.shape());
        for c in &self.components {
            for (a, m) in acc.data_mut().iter_mut().zip(c.mean.data()) {
                *a += c.weight * m;
            }
        }
        acc
    }

    /// Posterior responsibilities of each component for `z` under the
    /// noised marginals at level `alpha_bar`.
    pub fn responsibilities(&self, z: &Grid, alpha_bar: f64) -> Result<Vec<f64>> {
        self.shape().ensure_eq(&z.shape())?;
        check_alpha_bar(alpha_bar)?;
        let dim = z.shape().len() as f64;
        let root = alpha_bar.sqrt();
        let logits: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let var = alpha_bar * c.scale * c.scale + 1.0 - alpha_bar;
                let dist2: f64 = z
                    .data()
                    .iter()
                    .zip(c.mean.data())
                    .map(|(z, m)| (z - root * m).powi(2))
                    .sum();
                c.weight.ln() - 0.5 * dist2 / var - 0.5 * dim * var.ln()
            })
            .collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn eps_at(&self, z: &Grid, alpha_bar: f64) -> Result<Grid> {
        let resp = self.responsibilities(z, alpha_bar)?;
        let root = alpha_bar.sqrt();
        let noise = (1.0 - alpha_bar).sqrt();
        let mut out = Grid::zeros(z.shape());
        for (c, r) in self.components.iter().zip(resp) {
            let var = alpha_bar * c.scale * c.scale + 1.0 - alpha_bar;
            let k = r * noise / var;
            for ((o, zv), m) in out.data_mut().iter_mut().zip(z.data()).zip(c.mean.data()) {
                *o += k * (zv - root * m);
            }
        }
        Ok(out)
    }
}

impl ScoreModel for GaussianMixture {
    fn shape(&self) -> Shape {
        GaussianMixture::shape(self)
    }

    fn eps(&self, z: &Grid, alpha_bar: f64, _: &ConditionEmbedding, _: SlotMatch) -> Result<Grid> {
        self.eps_at(z, alpha_bar)
    }

    fn null_condition(&self) -> ConditionEmbedding {
        ConditionEmbedding::null(0, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionLabel {
    pub name: String,
    pub embedding: ConditionEmbedding,
    pub mixture: GaussianMixture,
}

/// Registry of labeled mixtures. A condition selects the label with the
/// nearest embedding (ties go to the lower index); the null condition gets
/// all labels pooled with equal weight.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMixture {
    labels: Vec<ConditionLabel>,
    pooled: GaussianMixture,
}

/// Builds a [`ConditionalMixture`]. Labels given without an embedding get
/// the style and content features of their mixture mean.
pub fn make_conditional_mixture(
    labels: Vec<(String, Option<ConditionEmbedding>, GaussianMixture)>,
) -> Result<ConditionalMixture> {
    if labels.is_empty() {
        return Err(Error::EmptyRegistry);
    }
    let shape = labels[0].2.shape();
    let n = labels.len() as f64;
    let mut registered = Vec::with_capacity(labels.len());
    let mut pooled = Vec::new();
    for (name, embedding, mixture) in labels {
        shape.ensure_eq(&mixture.shape())?;
        let embedding = match embedding {
            Some(e) => e,
            None => ConditionEmbedding::of_image(&mixture.mean()).map_err(|e| {
                Error::invalid(format!("label {name:?} needs an explicit embedding: {e}"))
            })?,
        };
        pooled.extend(mixture.components().iter().map(|c| GaussianComponent {
            weight: c.weight / n,
            ..c.clone()
        }));
        registered.push(ConditionLabel {
            name,
            embedding,
            mixture,
        });
    }
    let dims = registered[0].embedding.dims();
    if let Some(bad) = registered.iter().find(|l| l.embedding.dims() != dims) {
        return Err(Error::invalid(format!(
            "label {:?} has embedding dims {:?}, expected {dims:?}",
            bad.name,
            bad.embedding.dims()
        )));
    }
    Ok(ConditionalMixture {
        labels: registered,
        pooled: GaussianMixture::new(pooled)?,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

impl ConditionalMixture {
    pub fn labels(&self) -> &[ConditionLabel] {
        &self.labels
    }

    pub fn pooled(&self) -> &GaussianMixture {
        &self.pooled
    }

    pub fn label(&self, name: &str) -> Option<&ConditionLabel> {
        self.labels.iter().find(|l| l.name == name)
    }

    /// Index of the registered label nearest to `cond`.
    pub fn match_label(&self, cond: &ConditionEmbedding, slots: SlotMatch) -> Result<usize> {
        let dims = self.labels[0].embedding.dims();
        if cond.dims() != dims {
            return Err(Error::ShapeMismatch {
                expected: format!("embedding dims {dims:?}"),
                found: format!("{:?}", cond.dims()),
            });
        }
        let mut best = (0, f64::INFINITY);
        for (i, l) in self.labels.iter().enumerate() {
            let mut d = sq_dist(cond.style_slot(), l.embedding.style_slot());
            if slots == SlotMatch::Full {
                d += sq_dist(cond.content_slot(), l.embedding.content_slot());
            }
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    /// Mixture the model scores for `cond`.
    pub fn select(&self, cond: &ConditionEmbedding, slots: SlotMatch) -> Result<&GaussianMixture> {
        if cond.is_null() {
            return Ok(&self.pooled);
        }
        Ok(&self.labels[self.match_label(cond, slots)?].mixture)
    }
}

impl ScoreModel for ConditionalMixture {
    fn shape(&self) -> Shape {
        self.pooled.shape()
    }

    fn eps(
        &self,
        z: &Grid,
        alpha_bar: f64,
        cond: &ConditionEmbedding,
        slots: SlotMatch,
    ) -> Result<Grid> {
        self.select(cond, slots)?.eps_at(z, alpha_bar)
    }

    fn null_condition(&self) -> ConditionEmbedding {
        let (s, c) = self.labels[0].embedding.dims();
        ConditionEmbedding::null(s, c)
    }
}

// JSON document: means are nested arrays indexed [channel][row][column].

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    mean: Vec<Vec<Vec<f64>>>,
    scale: f64,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelDoc {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    style: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content: Option<Vec<f64>>,
    components: Vec<ComponentDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    labels: Vec<LabelDoc>,
}

fn grid_from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Grid> {
    let channels = nested.len();
    let height = nested.first().map_or(0, |c| c.len());
    let width = nested
        .first()
        .and_then(|c| c.first())
        .map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(channels * height * width);
    for plane in nested {
        if plane.len() != height {
            return Err(Error::invalid("ragged mean array (rows)"));
        }
        for row in plane {
            if row.len() != width {
                return Err(Error::invalid("ragged mean array (columns)"));
            }
            data.extend_from_slice(row);
        }
    }
    Grid::from_vec(Shape::new(height, width, channels), data)
}

fn grid_to_nested(g: &Grid) -> Vec<Vec<Vec<f64>>> {
    (0..g.channels())
        .map(|c| g.channel(c).chunks(g.width()).map(|r| r.to_vec()).collect())
        .collect()
}

impl ConditionalMixture {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| Error::Config {
            message: format!("model document: {e}"),
            line: e.line(),
            column: e.column(),
        })?;
        let mut labels = Vec::with_capacity(doc.labels.len());
        for l in doc.labels {
            let components = l
                .components
                .iter()
                .map(|c| {
                    Ok(GaussianComponent {
                        mean: grid_from_nested(&c.mean)?,
                        scale: c.scale,
                        weight: c.weight,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let embedding = match (l.style, l.content) {
                (Some(s), Some(c)) => Some(ConditionEmbedding::new(s, c)?),
                (None, None) => None,
                _ => {
                    return Err(Error::invalid(format!(
                        "label {:?}: give both style and content or neither",
                        l.name
                    )))
                }
            };
            labels.push((l.name, embedding, GaussianMixture::new(components)?));
        }
        make_conditional_mixture(labels)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            labels: self
                .labels
                .iter()
                .map(|l| LabelDoc {
                    name: l.name.clone(),
                    style: Some(l.embedding.style_slot().to_vec()),
                    content: Some(l.embedding.content_slot().to_vec()),
                    components: l
                        .mixture
                        .components()
                        .iter()
                        .map(|c| ComponentDoc {
                            mean: grid_to_nested(&c.mean),
                            scale: c.scale,
                            weight: c.weight,
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }
}
