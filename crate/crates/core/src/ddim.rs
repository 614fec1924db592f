//! Deterministic DDIM sampling and inversion.
//!
//! Step form used throughout (η = 0):
//!
//! ```text
//! z_prev = √(ᾱ_prev/ᾱ_t)·z_t + (√(1/ᾱ_prev − 1) − √(1/ᾱ_t − 1))·√ᾱ_prev·ε
//! ```
//!
//! Inversion applies the same expression with `ᾱ_prev` replaced by the next
//! (noisier) level, so one inversion step undoes one sampling step exactly
//! when both see the same ε.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::guidance::{
    cfg_combine, dual_scale_combine, negative_combine, GuidanceConfig, GuidanceMode,
};
use crate::schedule::NoiseSchedule;
use crate::score::{ScoreModel, SlotMatch};

/// Timestep label of the clean latent in a trajectory.
pub const CLEAN_TIMESTEP: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sampling,
    Inversion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    /// Training timestep, or [`CLEAN_TIMESTEP`].
    pub timestep: i64,
    pub latent: Grid,
}

/// Every latent visited by one sampling or inversion run, in visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub direction: Direction,
    pub entries: Vec<TrajectoryEntry>,
    pub guidance_used: GuidanceConfig,
}

impl TrajectoryRecord {
    pub fn last(&self) -> &Grid {
        &self
            .entries
            .last()
            .expect("trajectory is never empty")
            .latent
    }

    pub fn first(&self) -> &Grid {
        &self.entries[0].latent
    }
}

fn coeff(abar: f64) -> f64 {
    (1.0 / abar - 1.0).sqrt()
}

fn check_levels(noisy: f64, clean: f64, what: &str) -> Result<()> {
    if !(noisy > 0.0 && noisy <= clean && clean <= 1.0) {
        return Err(Error::invalid(format!(
            "{what}: need 0 < noisier alpha_bar ({noisy}) <= cleaner alpha_bar ({clean}) <= 1"
        )));
    }
    Ok(())
}

/// One denoising step from level `abar_t` to the cleaner level `abar_prev`.
pub fn ddim_step(z_t: &Grid, eps: &Grid, abar_t: f64, abar_prev: f64) -> Result<Grid> {
    check_levels(abar_t, abar_prev, "ddim_step")?;
    let a = (abar_prev / abar_t).sqrt();
    let b = (coeff(abar_prev) - coeff(abar_t)) * abar_prev.sqrt();
    z_t.zip_map(eps, |z, e| a * z + b * e)
}

/// One inversion step from level `abar_t` to the noisier level `abar_next`.
pub fn ddim_inverse_step(z_t: &Grid, eps: &Grid, abar_t: f64, abar_next: f64) -> Result<Grid> {
    check_levels(abar_next, abar_t, "ddim_inverse_step")?;
    let a = (abar_next / abar_t).sqrt();
    let b = (coeff(abar_next) - coeff(abar_t)) * abar_next.sqrt();
    z_t.zip_map(eps, |z, e| a * z + b * e)
}

/// ε for one step, querying only the branches `guidance.mode` needs.
pub fn guided_eps(
    model: &dyn ScoreModel,
    z: &Grid,
    abar: f64,
    guidance: &GuidanceConfig,
    slots: SlotMatch,
) -> Result<Grid> {
    let eps = |cond| model.eps(z, abar, cond, slots);
    let null = model.null_condition();
    match guidance.mode {
        GuidanceMode::None => eps(&guidance.positive),
        GuidanceMode::Cfg => {
            let uncond = eps(&null)?;
            cfg_combine(&uncond, &eps(&guidance.positive)?, guidance.omega)
        }
        GuidanceMode::Negative => {
            let neg = eps(&guidance.negative)?;
            negative_combine(&neg, &eps(&guidance.positive)?, guidance.omega_i)
        }
        GuidanceMode::Dual => {
            let base = eps(&null)?;
            dual_scale_combine(
                &base,
                &eps(&guidance.positive)?,
                &eps(&guidance.negative)?,
                guidance.omega_plus,
                guidance.omega_minus,
            )
        }
    }
}

fn check_input(model: &dyn ScoreModel, z: &Grid, guidance: &GuidanceConfig) -> Result<()> {
    model.shape().ensure_eq(&z.shape())?;
    guidance.validate()
}

/// Denoises `z_T` through every sampling step, noisiest first.
pub fn sample(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    z_t: &Grid,
    guidance: &GuidanceConfig,
) -> Result<TrajectoryRecord> {
    sample_with(model, schedule, z_t, guidance, SlotMatch::Full)
}

/// [`sample`] with an explicit condition-slot mode.
pub fn sample_with(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    z_t: &Grid,
    guidance: &GuidanceConfig,
    slots: SlotMatch,
) -> Result<TrajectoryRecord> {
    check_input(model, z_t, guidance)?;
    let steps = schedule.sample_steps();
    let n = steps.len();
    let mut entries = Vec::with_capacity(n + 1);
    entries.push(TrajectoryEntry {
        timestep: steps[n - 1] as i64,
        latent: z_t.clone(),
    });
    let mut z = z_t.clone();
    for k in (0..n).rev() {
        let (abar_t, abar_prev) = schedule.ddim_pair(k)?;
        let eps = guided_eps(model, &z, abar_t, guidance, slots)?;
        z = ddim_step(&z, &eps, abar_t, abar_prev)?;
        entries.push(TrajectoryEntry {
            timestep: if k == 0 {
                CLEAN_TIMESTEP
            } else {
                steps[k - 1] as i64
            },
            latent: z.clone(),
        });
    }
    Ok(TrajectoryRecord {
        direction: Direction::Sampling,
        entries,
        guidance_used: guidance.clone(),
    })
}

/// Maps a clean latent to the noisiest sampling level.
///
/// Step `k` moves from level `k − 1` (the clean latent for `k = 0`) to
/// level `k`, with ε evaluated on the current latent at the step's own
/// timestep. With `GuidanceMode::Negative` that ε is
/// `negative_combine(ε(C−), ε(C+), ω_i)`.
pub fn invert(
    model: &dyn ScoreModel,
    schedule: &NoiseSchedule,
    z_0: &Grid,
    guidance: &GuidanceConfig,
) -> Result<TrajectoryRecord> {
    check_input(model, z_0, guidance)?;
    let steps = schedule.sample_steps();
    let mut entries = Vec::with_capacity(steps.len() + 1);
    entries.push(TrajectoryEntry {
        timestep: CLEAN_TIMESTEP,
        latent: z_0.clone(),
    });
    let mut z = z_0.clone();
    for (k, &t) in steps.iter().enumerate() {
        let (abar_next, abar_t) = schedule.ddim_pair(k)?;
        let eps = guided_eps(model, &z, abar_next, guidance, SlotMatch::Full)?;
        z = ddim_inverse_step(&z, &eps, abar_t, abar_next)?;
        entries.push(TrajectoryEntry {
            timestep: t as i64,
            latent: z.clone(),
        });
    }
    Ok(TrajectoryRecord {
        direction: Direction::Inversion,
        entries,
        guidance_used: guidance.clone(),
    })
}
