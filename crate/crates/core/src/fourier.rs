//! 2D transforms, radial filters and band decomposition of latents.
//!
//! Transforms are unitary (`1/√(HW)` in both directions) and spectra are
//! DC-centered. Arbitrary sizes are handled by rustfft's mixed-radix and
//! Bluestein plans.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Shape, Spectrum};

/// Largest imaginary component `ifft2` will silently drop.
pub const IMAG_TOLERANCE: f64 = 1e-9;

/// Low-pass filter family and parameters. Radii are normalized so that
/// `r = 1` lies `min(H, W)/2` bins from DC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    Gaussian { sigma: f64 },
    Butterworth { cutoff: f64, order: u32 },
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec::Gaussian { sigma: 0.3 }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FilterSpec::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(
                Error::invalid(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            FilterSpec::Butterworth { cutoff, .. } if !(cutoff > 0.0 && cutoff <= 1.0) => {
                Err(Error::invalid(format!(
                    "butterworth cutoff must be in (0, 1], got {cutoff}"
                )))
            }
            FilterSpec::Butterworth { order: 0, .. } => {
                Err(Error::invalid("butterworth order must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Mask value at normalized radius `r`.
    pub fn response(&self, r: f64) -> f64 {
        match *self {
            FilterSpec::Gaussian { sigma } => (-(r * r) / (2.0 * sigma * sigma)).exp(),
            FilterSpec::Butterworth { cutoff, order } => {
                1.0 / (1.0 + (r / cutoff).powi(2 * order as i32))
            }
        }
    }
}

/// Which band `reduce_band` attenuates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Low,
    High,
}

/// Normalized radial distance of bin `(y, x)` from the centered DC bin.
pub fn radial_distance(y: usize, x: usize, h: usize, w: usize) -> f64 {
    let dy = y as f64 - (h / 2) as f64;
    let dx = x as f64 - (w / 2) as f64;
    (dy * dy + dx * dx).sqrt() / (h.min(w) as f64 / 2.0)
}

struct Plans {
    rows: Arc<dyn Fft<f64>>,
    cols: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(shape: Shape, direction: FftDirection) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows: planner.plan_fft(shape.width, direction),
            cols: planner.plan_fft(shape.height, direction),
        }
    }

    /// In-place unnormalized 2D transform of one row-major plane.
    fn run(&self, plane: &mut [Complex64], h: usize, w: usize) {
        for row in plane.chunks_exact_mut(w) {
            self.rows.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = plane[y * w + x];
            }
            self.cols.process(&mut column);
            for y in 0..h {
                plane[y * w + x] = column[y];
            }
        }
    }
}

fn check_transform_size(shape: Shape) -> Result<()> {
    if shape.height < 2 || shape.width < 2 {
        return Err(Error::invalid(format!(
            "transform needs H, W >= 2, got {shape}"
        )));
    }
    Ok(())
}

/// Moves DC from `(0, 0)` to `(h/2, w/2)`; `inverse` undoes it.
fn shift_plane(src: &[Complex64], dst: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    let (oy, ox) = (h / 2, w / 2);
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = ((y + oy) % h, (x + ox) % w);
            if inverse {
                dst[y * w + x] = src[sy * w + sx];
            } else {
                dst[sy * w + sx] = src[y * w + x];
            }
        }
    }
}

/// Per-channel unitary 2D DFT with DC at the grid center.
pub fn fft2(g: &Grid) -> Result<Spectrum> {
    let shape = g.shape();
    check_transform_size(shape)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("fft2 input"));
    }
    let (h, w) = (shape.height, shape.width);
    let plans = Plans::new(shape, FftDirection::Forward);
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); shape.len()];
    let mut plane = vec![Complex64::new(0.0, 0.0); shape.plane()];
    for c in 0..shape.channels {
        for (dst, &v) in plane.iter_mut().zip(g.channel(c)) {
            *dst = Complex64::new(v, 0.0);
        }
        plans.run(&mut plane, h, w);
        for v in plane.iter_mut() {
            *v *= norm;
        }
        let p = shape.plane();
        shift_plane(&plane, &mut out[c * p..(c + 1) * p], h, w, false);
    }
    Spectrum::from_vec(shape, out)
}

/// Inverse of [`fft2`]. Fails if the result carries an imaginary part above
/// [`IMAG_TOLERANCE`], which means the spectrum was not Hermitian.
pub fn ifft2(s: &Spectrum) -> Result<Grid> {
    let shape = s.shape();
    check_transform_size(shape)?;
    let (h, w) = (shape.height, shape.width);
    let plans = Plans::new(shape, FftDirection::Inverse);
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let mut out = Vec::with_capacity(shape.len());
    let mut plane = vec![Complex64::new(0.0, 0.0); shape.plane()];
    let mut worst = 0.0f64;
    for c in 0..shape.channels {
        shift_plane(s.channel(c), &mut plane, h, w, true);
        plans.run(&mut plane, h, w);
        for v in &plane {
            let v = v * norm;
            worst = worst.max(v.im.abs());
            out.push(v.re);
        }
    }
    if worst >= IMAG_TOLERANCE {
        return Err(Error::ImaginaryResidue(worst));
    }
    Grid::from_vec(shape, out)
}

/// Single-channel low-pass mask on a centered `h × w` spectrum; 1 at DC.
pub fn make_lowpass(spec: &FilterSpec, h: usize, w: usize) -> Result<Grid> {
    spec.validate()?;
    if h < 2 || w < 2 {
        return Err(Error::invalid(format!("mask needs h, w >= 2, got {h}x{w}")));
    }
    Ok(Grid::from_fn(Shape::new(h, w, 1), |_, y, x| {
        spec.response(radial_distance(y, x, h, w))
    }))
}

/// `1 − M` pointwise.
pub fn highpass_of(lowpass_mask: &Grid) -> Grid {
    lowpass_mask.map(|m| 1.0 - m)
}

fn check_mask(s: Shape, mask: &Grid) -> Result<()> {
    let m = mask.shape();
    if m.height != s.height || m.width != s.width || (m.channels != 1 && m.channels != s.channels) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} mask", s.height, s.width),
            found: m.to_string(),
        });
    }
    Ok(())
}

/// Mask value for spectrum bin `i`; single-channel masks apply to every channel.
fn mask_at(mask: &Grid, i: usize) -> f64 {
    let d = mask.data();
    d[i % d.len()]
}

/// Attenuates one band by `alpha`:
/// `Low → α·(f⊙L) + f⊙(1−L)`, `High → f⊙L + α·(f⊙(1−L))`.
/// `alpha = 1` returns the input unchanged.
pub fn reduce_band(s: &Spectrum, lowpass_mask: &Grid, alpha: f64, band: Band) -> Result<Spectrum> {
    check_mask(s.shape(), lowpass_mask)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(s.clone());
    }
    let data = s
        .data()
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let m = mask_at(lowpass_mask, i);
            match band {
                Band::Low => f * m * alpha + f * (1.0 - m),
                Band::High => f * m + f * (1.0 - m) * alpha,
            }
        })
        .collect();
    Spectrum::from_vec(s.shape(), data)
}

/// `Σ |f·M|²` over all bins and channels.
pub fn band_energy(s: &Spectrum, mask: &Grid) -> Result<f64> {
    check_mask(s.shape(), mask)?;
    Ok(s.data()
        .iter()
        .enumerate()
        .map(|(i, f)| (f * mask_at(mask, i)).norm_sqr())
        .sum())
}
