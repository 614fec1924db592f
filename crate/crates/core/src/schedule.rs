//! Noise schedules and the coefficient pairs used by deterministic DDIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters a [`NoiseSchedule`] is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleParams {
    pub t_train: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            t_train: 1000,
            beta_start: 8.5e-4,
            beta_end: 1.2e-2,
        }
    }
}

/// Scaled-linear β schedule with a uniformly spaced subset of sampling steps.
/// Deterministic (η = 0) only.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    params: ScheduleParams,
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
    sample_steps: Vec<usize>,
}

impl NoiseSchedule {
    pub fn new(params: ScheduleParams, t_sample: usize) -> Result<Self> {
        build_schedule(params.t_train, t_sample, params.beta_start, params.beta_end)
    }

    pub fn params(&self) -> ScheduleParams {
        self.params
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Cumulative signal coefficient ᾱ for every training timestep.
    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Training timesteps visited by the sampler, increasing.
    pub fn sample_steps(&self) -> &[usize] {
        &self.sample_steps
    }

    pub fn num_steps(&self) -> usize {
        self.sample_steps.len()
    }

    /// ᾱ at sampling step `k`.
    pub fn alpha_bar_at(&self, k: usize) -> Result<f64> {
        self.sample_steps
            .get(k)
            .map(|&t| self.alpha_bar[t])
            .ok_or(Error::IndexOutOfRange {
                index: k,
                len: self.sample_steps.len(),
            })
    }

    /// `(ᾱ_t, ᾱ_prev)` for sampling step `k`, where `ᾱ_prev` belongs to step
    /// `k − 1` and is 1 at `k = 0` (the clean latent).
    pub fn ddim_pair(&self, k: usize) -> Result<(f64, f64)> {
        let abar_t = self.alpha_bar_at(k)?;
        let abar_prev = if k == 0 {
            1.0
        } else {
            self.alpha_bar_at(k - 1)?
        };
        Ok((abar_t, abar_prev))
    }

    /// Same β table with a different number of sampling steps.
    pub fn with_steps(&self, t_sample: usize) -> Result<Self> {
        if t_sample == self.num_steps() {
            return Ok(self.clone());
        }
        Self::new(self.params, t_sample)
    }
}

/// Builds a scaled-linear schedule: `√β` runs linearly from `√beta_start` to
/// `√beta_end` over `t_train` steps and `ᾱ_t = Π_{i≤t} (1 − β_i)`.
///
/// Sampling steps use trailing spacing, `k·T/n + T/n − 1` for `k < n`, so the
/// last step is the final training timestep when `n` divides `T`.
pub fn build_schedule(
    t_train: usize,
    t_sample: usize,
    beta_start: f64,
    beta_end: f64,
) -> Result<NoiseSchedule> {
    if t_sample == 0 || t_sample > t_train {
        return Err(Error::invalid(format!(
            "need 1 <= t_sample <= t_train, got t_sample={t_sample}, t_train={t_train}"
        )));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::invalid(format!(
            "need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]"
        )));
    }
    let (lo, hi) = (beta_start.sqrt(), beta_end.sqrt());
    let betas: Vec<f64> = (0..t_train)
        .map(|i| {
            let frac = if t_train == 1 {
                0.0
            } else {
                i as f64 / (t_train - 1) as f64
            };
            let s = lo + (hi - lo) * frac;
            s * s
        })
        .collect();
    let mut alpha_bar = Vec::with_capacity(t_train);
    let mut acc = 1.0;
    for b in &betas {
        acc *= 1.0 - b;
        alpha_bar.push(acc);
    }
    if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
        // beta_start == beta_end is fine; underflow to a plateau is not
        return Err(Error::invalid("alpha_bar is not strictly decreasing"));
    }
    let offset = t_train / t_sample - 1;
    let sample_steps = (0..t_sample)
        .map(|k| k * t_train / t_sample + offset)
        .collect();
    Ok(NoiseSchedule {
        params: ScheduleParams {
            t_train,
            beta_start,
            beta_end,
        },
        betas,
        alpha_bar,
        sample_steps,
    })
}
