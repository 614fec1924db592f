//! End-to-end startpoint-enhanced style transfer and its ablation drivers.
//!
//! `style_transfer` runs, in order:
//! 1. `E− = (style features of the content image, content features of the style image)`;
//! 2. inversion of the content image with `negative_combine(ε(E−), ε(C+), ω_i)`;
//! 3. the startpoint construction (frequency manipulation by default);
//! 4. CFG sampling at `cfg_omega` with the style image's features in the
//!    style slot, matched on that slot only;
//! 5. metrics.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::ddim::{invert, sample_with, TrajectoryRecord};
use crate::error::{Error, Result, Stage, StageExt};
use crate::features::{extract_content, extract_style, CONTENT_DIM};
use crate::fourier::FilterSpec;
use crate::grid::Grid;
use crate::guidance::{build_negative_embedding, GuidanceConfig};
use crate::metrics::{artfid_composite, band_ratio, content_l2};
use crate::schedule::NoiseSchedule;
use crate::score::{ConditionEmbedding, ScoreModel, SlotMatch};
use crate::startpoint::{make_variant, StartpointKind, StartpointSpec};

pub const DEFAULT_OMEGA_I: f64 = 1.5;
pub const DEFAULT_CFG_OMEGA: f64 = 5.0;
pub const DEFAULT_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferConfig {
    pub content: Grid,
    pub style: Grid,
    pub positive_condition: ConditionEmbedding,
    pub omega_i: f64,
    pub cfg_omega: f64,
    pub startpoint: StartpointSpec,
    pub steps: usize,
    /// Seeds every stochastic startpoint draw; overrides `startpoint.seed`.
    pub seed: u64,
}

impl TransferConfig {
    pub fn new(content: Grid, style: Grid, positive_condition: ConditionEmbedding) -> Self {
        Self {
            content,
            style,
            positive_condition,
            omega_i: DEFAULT_OMEGA_I,
            cfg_omega: DEFAULT_CFG_OMEGA,
            startpoint: StartpointSpec::default(),
            steps: DEFAULT_STEPS,
            seed: 0,
        }
    }

    pub fn with_kind(&self, kind: StartpointKind) -> Self {
        let mut cfg = self.clone();
        cfg.startpoint.kind = kind;
        cfg
    }

    /// Startpoint spec as actually run.
    pub fn resolved_startpoint(&self) -> StartpointSpec {
        StartpointSpec {
            seed: self.seed,
            ..self.startpoint.clone()
        }
    }

    fn validate(&self, model: &dyn ScoreModel) -> Result<()> {
        model.shape().ensure_eq(&self.content.shape())?;
        model.shape().ensure_eq(&self.style.shape())?;
        if self.steps == 0 {
            return Err(Error::invalid("steps must be positive"));
        }
        for (name, v) in [("omega_i", self.omega_i), ("cfg_omega", self.cfg_omega)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        self.startpoint.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub output: Grid,
    pub startpoint: Grid,
    pub inversion_trajectory: TrajectoryRecord,
    pub sampling_trajectory: TrajectoryRecord,
    pub metrics: BTreeMap<String, f64>,
    pub manifest: serde_json::Value,
}

/// Inversion output shared by every startpoint variant of one config.
struct Inverted {
    negative: ConditionEmbedding,
    trajectory: TrajectoryRecord,
}

fn invert_content(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    cfg: &TransferConfig,
) -> Result<Inverted> {
    let negative = (|| {
        let style_of_content = extract_style(&cfg.content)?;
        let content_of_style = extract_content(&cfg.style)?;
        let dims = (style_of_content.len(), CONTENT_DIM);
        build_negative_embedding(style_of_content, content_of_style, dims.0, dims.1)
    })()
    .stage(Stage::Embedding)?;
    let guidance = GuidanceConfig::negative(
        cfg.positive_condition.clone(),
        negative.clone(),
        cfg.omega_i,
    );
    let trajectory = invert(model, schedule, &cfg.content, &guidance).stage(Stage::Inversion)?;
    Ok(Inverted {
        negative,
        trajectory,
    })
}

fn finish(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    cfg: &TransferConfig,
    inverted: &Inverted,
) -> Result<TransferResult> {
    let spec = cfg.resolved_startpoint();
    let startpoint = make_variant(inverted.trajectory.last(), &spec).stage(Stage::Startpoint)?;
    let sampling_condition = cfg
        .positive_condition
        .with_style(extract_style(&cfg.style).stage(Stage::Sampling)?)
        .stage(Stage::Sampling)?;
    let guidance =
        GuidanceConfig::cfg(sampling_condition, inverted.negative.clone(), cfg.cfg_omega);
    let sampling = sample_with(
        model,
        schedule,
        &startpoint,
        &guidance,
        SlotMatch::StyleOnly,
    )
    .stage(Stage::Sampling)?;
    let output = sampling.last().clone();
    let metrics = compute_metrics(cfg, &spec.filter, &startpoint, &output).stage(Stage::Metrics)?;
    let manifest = manifest(cfg, schedule, &spec, &metrics);
    Ok(TransferResult {
        output,
        startpoint,
        inversion_trajectory: inverted.trajectory.clone(),
        sampling_trajectory: sampling,
        metrics,
        manifest,
    })
}

fn compute_metrics(
    cfg: &TransferConfig,
    filter: &FilterSpec,
    startpoint: &Grid,
    output: &Grid,
) -> Result<BTreeMap<String, f64>> {
    let content_dist = content_l2(output, &cfg.content)?;
    let style_out = extract_style(output)?;
    let style_ref = extract_style(&cfg.style)?;
    let style_dist = style_out
        .iter()
        .zip(&style_ref)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut m = BTreeMap::new();
    m.insert("content_l2".to_string(), content_dist);
    m.insert(
        "low_band_ratio".to_string(),
        band_ratio(startpoint, filter)?,
    );
    m.insert(
        "output_low_band_ratio".to_string(),
        band_ratio(output, filter)?,
    );
    m.insert("style_embedding_distance".to_string(), style_dist);
    m.insert(
        "artfid_analog".to_string(),
        artfid_composite(content_dist, style_dist)?,
    );
    Ok(m)
}

fn manifest(
    cfg: &TransferConfig,
    schedule: &NoiseSchedule,
    spec: &StartpointSpec,
    metrics: &BTreeMap<String, f64>,
) -> serde_json::Value {
    let params = schedule.params();
    json!({
        "omega_i": cfg.omega_i,
        "cfg_omega": cfg.cfg_omega,
        "steps": schedule.num_steps(),
        "seed": cfg.seed,
        "startpoint": spec,
        "schedule": params,
        "shape": cfg.content.shape(),
        "metrics": metrics,
    })
}

fn schedule_for(schedule: &NoiseSchedule, cfg: &TransferConfig) -> Result<NoiseSchedule> {
    schedule.with_steps(cfg.steps)
}

pub fn style_transfer(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    cfg: &TransferConfig,
) -> Result<TransferResult> {
    cfg.validate(model)?;
    let schedule = schedule_for(schedule, cfg)?;
    let inverted = invert_content(model, &schedule, cfg)?;
    finish(model, &schedule, cfg, &inverted)
}

/// One transfer per startpoint kind; everything else, seed included, is
/// shared. Results come back in `kinds` order.
pub fn ablate_startpoints(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    base: &TransferConfig,
    kinds: &[StartpointKind],
) -> Result<Vec<TransferResult>> {
    if kinds.is_empty() {
        return Err(Error::invalid(
            "ablation needs at least one startpoint kind",
        ));
    }
    base.validate(model)?;
    let schedule = schedule_for(schedule, base)?;
    let inverted = invert_content(model, &schedule, base)?;
    kinds
        .par_iter()
        .map(|&k| finish(model, &schedule, &base.with_kind(k), &inverted))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub alpha: f64,
    pub content_l2: f64,
    pub low_band_ratio: f64,
    pub style_embedding_distance: f64,
}

/// Frequency-manipulated transfers over the cross product of gaussian filter
/// widths and reduction factors, rows ordered sigma-major.
pub fn filter_sweep(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    base: &TransferConfig,
    sigmas: &[f64],
    alphas: &[f64],
) -> Result<Vec<SweepRow>> {
    if sigmas.is_empty() || alphas.is_empty() {
        return Err(Error::invalid(
            "sweep needs at least one sigma and one alpha",
        ));
    }
    let mut base = base.with_kind(StartpointKind::FreqManipulated);
    base.validate(model)?;
    let schedule = schedule_for(schedule, &base)?;
    let inverted = invert_content(model, &schedule, &base)?;
    let cells: Vec<(f64, f64)> = sigmas
        .iter()
        .flat_map(|&s| alphas.iter().map(move |&a| (s, a)))
        .collect();
    base.startpoint.filter = FilterSpec::default();
    cells
        .par_iter()
        .map(|&(sigma, alpha)| {
            let mut cfg = base.clone();
            cfg.startpoint.filter = FilterSpec::Gaussian { sigma };
            cfg.startpoint.alpha = alpha;
            cfg.startpoint.validate()?;
            let r = finish(model, &schedule, &cfg, &inverted)?;
            Ok(SweepRow {
                sigma,
                alpha,
                content_l2: r.metrics["content_l2"],
                low_band_ratio: r.metrics["low_band_ratio"],
                style_embedding_distance: r.metrics["style_embedding_distance"],
            })
        })
        .collect()
}
