//! Sampling startpoints: the frequency-manipulated latent and the ablation
//! variants (random, noised, shifted, scaled).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{fft2, ifft2, make_lowpass, reduce_band, Band, FilterSpec};
use crate::grid::Grid;
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartpointKind {
    /// The inverted latent as is.
    Inversion,
    /// Fresh `N(0, I)`, ignoring the inverted latent.
    Random,
    /// `z_T + N(0, I)`.
    Noised,
    /// `z_T + U(−0.5, 0.5)`.
    Shifted,
    /// `z_T × U(0.5, 1)`.
    Scaled,
    /// Low band reduced by `alpha` plus `(1 − alpha)`-scaled noise.
    FreqManipulated,
}

impl StartpointKind {
    pub const ALL: [StartpointKind; 6] = [
        StartpointKind::Inversion,
        StartpointKind::Random,
        StartpointKind::Noised,
        StartpointKind::Shifted,
        StartpointKind::Scaled,
        StartpointKind::FreqManipulated,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StartpointKind::Inversion => "inversion",
            StartpointKind::Random => "random",
            StartpointKind::Noised => "noised",
            StartpointKind::Shifted => "shifted",
            StartpointKind::Scaled => "scaled",
            StartpointKind::FreqManipulated => "freq_manipulated",
        }
    }
}

impl std::str::FromStr for StartpointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StartpointKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown startpoint kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StartpointSpec {
    pub kind: StartpointKind,
    pub alpha: f64,
    /// Standard deviation of the additive noise; independent of the filter.
    pub noise_sigma: f64,
    pub filter: FilterSpec,
    pub seed: u64,
    /// Scaled variant: draw one multiplier per bin instead of per image.
    pub scale_per_bin: bool,
    /// Shifted variant: draw one offset per image instead of per bin.
    pub shift_per_image: bool,
}

impl Default for StartpointSpec {
    fn default() -> Self {
        Self {
            kind: StartpointKind::FreqManipulated,
            alpha: 0.7,
            noise_sigma: 1.0,
            filter: FilterSpec::default(),
            seed: 0,
            scale_per_bin: false,
            shift_per_image: false,
        }
    }
}

impl StartpointSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        self.filter.validate()
    }
}

/// `ifft2(reduce_band(fft2(z), L, α, low)) + (1 − α)·η` with
/// `η ~ N(0, noise_sigma²)` drawn per bin in the spatial domain.
/// `alpha = 1` returns `z_t` unchanged.
pub fn frequency_manipulate(
    z_t: &Grid,
    filter: &FilterSpec,
    alpha: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<Grid> {
    StartpointSpec {
        alpha,
        noise_sigma,
        filter: *filter,
        ..Default::default()
    }
    .validate()?;
    if alpha == 1.0 {
        return Ok(z_t.clone());
    }
    let mask = make_lowpass(filter, z_t.height(), z_t.width())?;
    let reduced = ifft2(&reduce_band(&fft2(z_t)?, &mask, alpha, Band::Low)?)?;
    if noise_sigma == 0.0 {
        return Ok(reduced);
    }
    let noise = SeededRng::new(seed, Stream::Noise).normal_grid(z_t.shape(), noise_sigma);
    reduced.zip_map(&noise, |r, n| r + n * (1.0 - alpha))
}

pub fn make_variant(z_t: &Grid, spec: &StartpointSpec) -> Result<Grid> {
    spec.validate()?;
    let shape = z_t.shape();
    let mut rng = SeededRng::new(spec.seed, Stream::Variant);
    match spec.kind {
        StartpointKind::Inversion => Ok(z_t.clone()),
        StartpointKind::Random => Ok(rng.normal_grid(shape, 1.0)),
        StartpointKind::Noised => z_t.add(&rng.normal_grid(shape, 1.0)),
        StartpointKind::Shifted if spec.shift_per_image => {
            let u = rng.uniform(-0.5, 0.5);
            Ok(z_t.map(|v| v + u))
        }
        StartpointKind::Shifted => z_t.add(&rng.uniform_grid(shape, -0.5, 0.5)),
        StartpointKind::Scaled if spec.scale_per_bin => {
            z_t.zip_map(&rng.uniform_grid(shape, 0.5, 1.0), |v, u| v * u)
        }
        StartpointKind::Scaled => {
            let u = rng.uniform(0.5, 1.0);
            Ok(z_t.scale(u))
        }
        StartpointKind::FreqManipulated => {
            frequency_manipulate(z_t, &spec.filter, spec.alpha, spec.noise_sigma, spec.seed)
        }
    }
}
