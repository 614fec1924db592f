//! Synthetic content/style images and the conditional models built around
//! them. Used by the self-test, the fixture generator and the experiments.
//!
//! Content images carry a smooth low-frequency background (per-channel
//! offset plus a gentle ramp) and layout structure (rectangles and an
//! oriented stripe field). Style images carry a palette offset, a fine
//! texture and one large disk, which is the style image's own content.

use std::f64::consts::PI;

use crate::error::Result;
use crate::fourier::{fft2, ifft2, make_lowpass, reduce_band, Band, FilterSpec};
use crate::grid::{Grid, Shape};
use crate::rng::{SeededRng, Stream};
use crate::score::{make_conditional_mixture, ConditionalMixture, GaussianMixture};

pub const CONTENT_LABEL: &str = "content";
pub const STYLE_LABEL: &str = "style";

/// Default latent shape of the toy world.
pub fn default_shape() -> Shape {
    Shape::new(16, 16, 4)
}

pub fn content_image(shape: Shape, seed: u64) -> Grid {
    let mut rng = SeededRng::new(seed, Stream::Named("content-image"));
    let (h, w) = (shape.height as f64, shape.width as f64);
    let offsets: Vec<f64> = (0..shape.channels)
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    let ramps: Vec<(f64, f64)> = (0..shape.channels)
        .map(|_| (0.05 * rng.normal(), 0.05 * rng.normal()))
        .collect();
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..1 + (rng.next_u64() % 3) as usize)
        .map(|_| {
            let y0 = rng.uniform(0.0, h * 0.6);
            let x0 = rng.uniform(0.0, w * 0.6);
            let amp = rng.uniform(0.5, 1.5)
                * if rng.next_u64().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
            (
                y0,
                x0,
                y0 + rng.uniform(3.0, h * 0.5),
                x0 + rng.uniform(3.0, w * 0.5),
                amp,
            )
        })
        .collect();
    let freq = rng.uniform(2.0, 5.0);
    let theta = rng.uniform(0.0, PI);
    let stripe_amp = rng.uniform(0.2, 0.8);
    let weights: Vec<f64> = (0..shape.channels).map(|_| rng.uniform(0.5, 1.0)).collect();
    Grid::from_fn(shape, |c, y, x| {
        let (yf, xf) = (y as f64, x as f64);
        let mut layout = 0.0;
        for &(y0, x0, y1, x1, amp) in &rects {
            if yf >= y0 && yf < y1 && xf >= x0 && xf < x1 {
                layout += amp;
            }
        }
        let phase = 2.0 * PI * freq * (theta.cos() * xf / w + theta.sin() * yf / h);
        layout += stripe_amp * phase.sin().signum();
        offsets[c] + ramps[c].0 * (xf - w / 2.0) + ramps[c].1 * (yf - h / 2.0) + weights[c] * layout
    })
}

pub fn style_image(shape: Shape, seed: u64) -> Grid {
    let mut rng = SeededRng::new(seed, Stream::Named("style-image"));
    let (h, w) = (shape.height as f64, shape.width as f64);
    let palette: Vec<f64> = (0..shape.channels)
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    let period = 2 + (rng.next_u64() % 3) as usize;
    let texture_amp = rng.uniform(0.3, 1.0);
    let (cy, cx) = (rng.uniform(h * 0.3, h * 0.7), rng.uniform(w * 0.3, w * 0.7));
    let radius = rng.uniform(h * 0.2, h * 0.35);
    Grid::from_fn(shape, |c, y, x| {
        let checker = if ((y / period) + (x / period) + c).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let disk = if (y as f64 - cy).hypot(x as f64 - cx) < radius {
            1.0
        } else {
            0.0
        };
        palette[c] + texture_amp * checker + disk
    })
}

/// Low-pass copy of an image (gaussian mask, all high band removed).
pub fn blur(img: &Grid, sigma: f64) -> Result<Grid> {
    let mask = make_lowpass(&FilterSpec::Gaussian { sigma }, img.height(), img.width())?;
    ifft2(&reduce_band(&fft2(img)?, &mask, 0.0, Band::High)?)
}

/// Per-pair conditional model: the `content` label is centred on a blurred
/// copy of the content image (its coarse layout, standing in for a caption),
/// the `style` label on the style image itself. Both have scale `spread`.
pub fn pair_model(content: &Grid, style: &Grid, spread: f64) -> Result<ConditionalMixture> {
    make_conditional_mixture(vec![
        (
            CONTENT_LABEL.to_string(),
            None,
            GaussianMixture::isotropic(blur(content, 0.3)?, spread)?,
        ),
        (
            STYLE_LABEL.to_string(),
            None,
            GaussianMixture::isotropic(style.clone(), spread)?,
        ),
    ])
}

/// Two labelled modes `a` and `b` with structured means a fixed distance apart.
pub fn two_mode_model(shape: Shape, spread: f64) -> Result<ConditionalMixture> {
    let a = content_image(shape, 1);
    let b = style_image(shape, 2);
    make_conditional_mixture(vec![
        (
            "a".to_string(),
            None,
            GaussianMixture::isotropic(a, spread)?,
        ),
        (
            "b".to_string(),
            None,
            GaussianMixture::isotropic(b, spread)?,
        ),
    ])
}
