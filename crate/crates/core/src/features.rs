//! Toy style and content extractors.
//!
//! Style: per-channel mean, per-channel standard deviation and the fraction of
//! spectral energy in 8 radial bins (`2C + 8` values). Content: an 8×8
//! average-pooled gradient-magnitude map (64 values).

use crate::error::{Error, Result};
use crate::fourier::{fft2, radial_distance};
use crate::grid::Grid;

pub const SPECTRAL_BINS: usize = 8;
pub const CONTENT_SIDE: usize = 8;
pub const CONTENT_DIM: usize = CONTENT_SIDE * CONTENT_SIDE;

pub fn style_dim(channels: usize) -> usize {
    2 * channels + SPECTRAL_BINS
}

/// Radial bin of a normalized radius. Radii past the last edge (corners)
/// land in the outermost bin.
pub fn spectral_bin(r: f64) -> usize {
    ((r * SPECTRAL_BINS as f64).floor() as usize).min(SPECTRAL_BINS - 1)
}

pub fn extract_style(img: &Grid) -> Result<Vec<f64>> {
    let plane = img.shape().plane() as f64;
    let mut out = Vec::with_capacity(style_dim(img.channels()));
    let means: Vec<f64> = (0..img.channels())
        .map(|c| img.channel(c).iter().sum::<f64>() / plane)
        .collect();
    out.extend_from_slice(&means);
    for (c, mean) in means.iter().enumerate() {
        let var = img
            .channel(c)
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / plane;
        out.push(var.sqrt());
    }
    out.extend(radial_profile(img)?);
    Ok(out)
}

/// Fraction of total spectral energy per radial bin, summed over channels.
/// All zeros for an all-zero image.
pub fn radial_profile(img: &Grid) -> Result<[f64; SPECTRAL_BINS]> {
    let s = fft2(img)?;
    let (h, w) = (img.height(), img.width());
    let mut bins = [0.0; SPECTRAL_BINS];
    for c in 0..img.channels() {
        for y in 0..h {
            for x in 0..w {
                bins[spectral_bin(radial_distance(y, x, h, w))] += s.get(c, y, x).norm_sqr();
            }
        }
    }
    let total: f64 = bins.iter().sum();
    if total > 0.0 {
        for b in bins.iter_mut() {
            *b /= total;
        }
    }
    Ok(bins)
}

/// Gradient magnitude from central differences with clamped borders,
/// combined across channels as `√Σ_c (g_x² + g_y²)`.
pub fn gradient_magnitude(img: &Grid) -> Grid {
    let (h, w) = (img.height(), img.width());
    let mut out = Grid::zeros(crate::grid::Shape::new(h, w, 1));
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let mut acc = 0.0;
            for c in 0..img.channels() {
                let gx = (img.get(c, y, xr) - img.get(c, y, xl)) / 2.0;
                let gy = (img.get(c, yd, x) - img.get(c, yu, x)) / 2.0;
                acc += gx * gx + gy * gy;
            }
            out.set(0, y, x, acc.sqrt());
        }
    }
    out
}

pub fn extract_content(img: &Grid) -> Result<Vec<f64>> {
    let (h, w) = (img.height(), img.width());
    if h < CONTENT_SIDE || w < CONTENT_SIDE {
        return Err(Error::invalid(format!(
            "content extraction needs at least {CONTENT_SIDE}x{CONTENT_SIDE}, got {h}x{w}"
        )));
    }
    let grad = gradient_magnitude(img);
    let mut out = Vec::with_capacity(CONTENT_DIM);
    for by in 0..CONTENT_SIDE {
        let (y0, y1) = (by * h / CONTENT_SIDE, (by + 1) * h / CONTENT_SIDE);
        for bx in 0..CONTENT_SIDE {
            let (x0, x1) = (bx * w / CONTENT_SIDE, (bx + 1) * w / CONTENT_SIDE);
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += grad.get(0, y, x);
                }
            }
            out.push(sum / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    Ok(out)
}
