//! Quick invariant checks run by the `selftest` command.

use std::fmt;

use crate::ddim::{ddim_inverse_step, ddim_step, invert, sample};
use crate::error::Result;
use crate::fourier::{fft2, highpass_of, ifft2, make_lowpass, reduce_band, Band, FilterSpec};
use crate::grid::{Grid, Shape, Spectrum};
use crate::guidance::{cfg_combine, dual_scale_combine, negative_combine, GuidanceConfig};
use crate::io::{decode_raw, encode_raw};
use crate::metrics::{artfid_composite, frechet_gaussian, FeatureSet};
use crate::rng::{SeededRng, Stream};
use crate::schedule::{NoiseSchedule, ScheduleParams};
use crate::score::{GaussianMixture, ScoreModel};
use crate::startpoint::frequency_manipulate;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict}  {:<28} {}", self.name, self.detail)
    }
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match run() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn noise(shape: Shape, seed: u64) -> Grid {
    SeededRng::new(seed, Stream::Named("selftest")).normal_grid(shape, 1.0)
}

fn fft_round_trip() -> Result<(bool, String)> {
    let g = noise(Shape::new(12, 10, 2), 1);
    let s = fft2(&g)?;
    let back = ifft2(&s)?;
    let err = back.sub(&g)?.max_abs();
    let parseval = (s.energy() - g.sum_sq()).abs() / g.sum_sq();
    Ok((
        err < 1e-10 && parseval < 1e-9,
        format!("max err {err:.1e}, parseval {parseval:.1e}"),
    ))
}

fn filter_partition() -> Result<(bool, String)> {
    let low = make_lowpass(&FilterSpec::default(), 9, 14)?;
    let high = highpass_of(&low);
    let worst = low
        .add(&high)?
        .data()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((worst == 0.0, format!("max |L+H-1| {worst:e}")))
}

/// Energies of the low and high components `α·f⊙L` and `f⊙H` of the
/// manipulated spectrum against those of the input.
fn energy_law() -> Result<(bool, String)> {
    let g = noise(Shape::new(16, 16, 2), 2);
    let filter = FilterSpec::default();
    let mask = make_lowpass(&filter, 16, 16)?;
    let f = fft2(&g)?;
    let low_in = reduce_band(&f, &mask, 0.0, Band::High)?;
    let high_in = reduce_band(&f, &mask, 0.0, Band::Low)?;
    let out = fft2(&frequency_manipulate(&g, &filter, 0.7, 0.0, 0)?)?;
    let residual = |other: &Spectrum, k: f64| -> f64 {
        out.data()
            .iter()
            .zip(other.data())
            .map(|(x, y)| (x - y * k).norm_sqr())
            .sum()
    };
    let factor = residual(&high_in, 1.0) / low_in.energy();
    let drift = (residual(&low_in, 0.7) - high_in.energy()).abs() / high_in.energy();
    Ok((
        (factor - 0.49).abs() < 1e-9 && drift < 1e-9,
        format!("low factor {factor:.12}, high drift {drift:.1e}"),
    ))
}

fn guidance_identities() -> Result<(bool, String)> {
    let shape = Shape::new(4, 4, 1);
    let (u, c, n) = (noise(shape, 3), noise(shape, 4), noise(shape, 5));
    let ok = cfg_combine(&u, &c, 0.0)? == u
        && cfg_combine(&u, &c, 1.0)? == c
        && negative_combine(&n, &c, 1.0)? == c
        && dual_scale_combine(&u, &c, &n, 1.0, 0.0)?.sub(&c)?.max_abs() < 1e-12;
    Ok((ok, "omega 0/1 degeneracies".into()))
}

fn ddim_round_trip() -> Result<(bool, String)> {
    let shape = Shape::new(4, 4, 2);
    let model = GaussianMixture::isotropic(Grid::zeros(shape), 1.0)?;
    let schedule = NoiseSchedule::new(ScheduleParams::default(), 50)?;
    let x0 = noise(shape, 7);
    let e = noise(shape, 8);
    let one = ddim_inverse_step(&ddim_step(&x0, &e, 0.3, 0.9)?, &e, 0.9, 0.3)?
        .sub(&x0)?
        .max_abs();
    let g = GuidanceConfig::none(model.null_condition(), model.null_condition());
    let zt = invert(&model, &schedule, &x0, &g)?;
    let back = sample(&model, &schedule, zt.last(), &g)?;
    let rel = back.last().sub(&x0)?.norm() / x0.norm();
    Ok((
        one < 1e-12 && rel < 1e-2,
        format!("single step {one:.1e}, 50-step rel {rel:.1e}"),
    ))
}

fn metric_values() -> Result<(bool, String)> {
    let p = FeatureSet::from_moments(
        DVector::from_element(1, 0.0),
        DMatrix::from_element(1, 1, 1.0),
    )?;
    let q = FeatureSet::from_moments(
        DVector::from_element(1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
    )?;
    let d = frechet_gaussian(&p, &q)?;
    let same = frechet_gaussian(&p, &p)?;
    let a = artfid_composite(0.4881, 13.448)?;
    let ok = (d - 1.0).abs() < 1e-10 && same < 1e-8 && (a - 1.4881 * 14.448).abs() < 1e-6;
    Ok((ok, format!("frechet {d:.12}, artfid {a:.6}")))
}

fn raw_format() -> Result<(bool, String)> {
    let g = noise(Shape::new(3, 7, 2), 9).scale(-3.0);
    let back = decode_raw(&encode_raw(&g)?)?;
    let exact = back
        .data()
        .iter()
        .zip(g.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    Ok((exact && back.shape() == g.shape(), "bit-exact".into()))
}

fn rng_streams() -> Result<(bool, String)> {
    let draw = |s| {
        let mut r = SeededRng::new(42, s);
        (0..64).map(|_| r.next_u64()).collect::<Vec<_>>()
    };
    let (a, b) = (draw(Stream::Noise), draw(Stream::Variant));
    let repeat = draw(Stream::Noise) == a;
    Ok((repeat && a[0] != b[0], "repeatable, independent".into()))
}

fn band_reduction_linear() -> Result<(bool, String)> {
    let g = noise(Shape::new(8, 8, 1), 10);
    let mask = make_lowpass(&FilterSpec::default(), 8, 8)?;
    let s = fft2(&g)?;
    let r = reduce_band(&s, &mask, 0.7, Band::Low)?;
    let worst = s
        .data()
        .iter()
        .zip(r.data())
        .zip(mask.data())
        .map(|((f, r), m)| (f * m * 0.7 + f * (1.0 - m) - r).norm())
        .fold(0.0, f64::max);
    Ok((worst == 0.0, format!("max bin deviation {worst:e}")))
}

pub fn run_selftest() -> Vec<Check> {
    vec![
        check("fft round trip + parseval", fft_round_trip),
        check("lowpass + highpass = 1", filter_partition),
        check("band reduction per bin", band_reduction_linear),
        check("low-band energy x alpha^2", energy_law),
        check("guidance degeneracies", guidance_identities),
        check("ddim inversion round trip", ddim_round_trip),
        check("frechet / artfid values", metric_values),
        check("raw grid format", raw_format),
        check("rng streams", rng_streams),
    ]
}
