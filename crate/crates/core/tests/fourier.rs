use std::f64::consts::PI;

use proptest::prelude::*;
use rustfft::num_complex::Complex64;
use ssp::fourier::{
    band_energy, fft2, highpass_of, ifft2, make_lowpass, reduce_band, Band, FilterSpec,
};
use ssp::rng::{SeededRng, Stream};
use ssp::{Grid, Shape, Spectrum};

fn noise(shape: Shape, seed: u64) -> Grid {
    SeededRng::new(seed, Stream::Named("fourier-test")).normal_grid(shape, 1.0)
}

/// Direct O(N²) unitary DFT, output indexed so that frequency `(i − ⌊H/2⌋, j − ⌊W/2⌋)` sits at `(i, j)`.
fn direct_dft(g: &Grid) -> Vec<Complex64> {
    let (h, w) = (g.height(), g.width());
    let norm = 1.0 / ((h * w) as f64).sqrt();
    let mut out = Vec::with_capacity(g.data().len());
    for c in 0..g.channels() {
        for i in 0..h {
            for j in 0..w {
                let (u, v) = (i as f64 - (h / 2) as f64, j as f64 - (w / 2) as f64);
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -2.0 * PI * (u * y as f64 / h as f64 + v * x as f64 / w as f64);
                        acc += Complex64::from_polar(g.get(c, y, x), phase);
                    }
                }
                out.push(acc * norm);
            }
        }
    }
    out
}

/// Radius from the centered DC bin in units of `min(H, W)/2`, computed independently of the library.
fn oracle_radius(y: usize, x: usize, h: usize, w: usize) -> f64 {
    let cy = (h / 2) as f64;
    let cx = (w / 2) as f64;
    ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt() * 2.0 / h.min(w) as f64
}

#[test]
fn matches_direct_dft_small_sizes() {
    for (i, &(h, w)) in [
        (2, 2),
        (3, 5),
        (4, 4),
        (5, 7),
        (8, 6),
        (9, 12),
        (16, 16),
        (13, 16),
    ]
    .iter()
    .enumerate()
    {
        let g = noise(Shape::new(h, w, 2), i as u64);
        let fast = fft2(&g).unwrap();
        let slow = direct_dft(&g);
        let worst = fast
            .data()
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10, "{h}x{w}: {worst:e}");
    }
}

#[test]
fn round_trip_and_parseval() {
    for (i, &(h, w)) in [(16, 16), (11, 7), (32, 24)].iter().enumerate() {
        let g = noise(Shape::new(h, w, 3), 10 + i as u64);
        let s = fft2(&g).unwrap();
        assert!(ifft2(&s).unwrap().sub(&g).unwrap().max_abs() < 1e-10);
        let direct: f64 = g.data().iter().map(|v| v * v).sum();
        assert!((s.energy() - direct).abs() / direct < 1e-9);
    }
}

#[test]
fn dc_bin_holds_scaled_mean() {
    let g = noise(Shape::new(6, 10, 1), 3);
    let s = fft2(&g).unwrap();
    let mean = g.data().iter().sum::<f64>() / 60.0;
    let dc = s.get(0, 3, 5);
    assert!((dc.re - mean * 60f64.sqrt()).abs() < 1e-12);
    assert!(dc.im.abs() < 1e-12);
}

#[test]
fn non_hermitian_spectrum_rejected() {
    let shape = Shape::new(4, 4, 1);
    let mut data = vec![Complex64::new(0.0, 0.0); 16];
    data[5] = Complex64::new(0.0, 1.0);
    let s = Spectrum::from_vec(shape, data).unwrap();
    assert!(ifft2(&s).is_err());
}

#[test]
fn mask_values_match_oracle() {
    let (h, w) = (12, 20);
    let gauss = make_lowpass(&FilterSpec::Gaussian { sigma: 0.3 }, h, w).unwrap();
    let bw = make_lowpass(
        &FilterSpec::Butterworth {
            cutoff: 0.4,
            order: 2,
        },
        h,
        w,
    )
    .unwrap();
    for y in 0..h {
        for x in 0..w {
            let r = oracle_radius(y, x, h, w);
            assert!((gauss.get(0, y, x) - (-r * r / 0.18).exp()).abs() < 1e-15);
            assert!((bw.get(0, y, x) - 1.0 / (1.0 + (r / 0.4).powi(4))).abs() < 1e-15);
        }
    }
    assert_eq!(gauss.get(0, 6, 10), 1.0);
    assert_eq!(highpass_of(&gauss).get(0, 6, 10), 0.0);
    // r = 0.3 lies 1.8 bins from DC on a 12-high grid; check the response directly.
    let hp = 1.0 - FilterSpec::Gaussian { sigma: 0.3 }.response(0.3);
    assert!((hp - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    assert!((hp - 0.3935).abs() < 1e-4);
}

#[test]
fn alpha_zero_low_removes_dc() {
    let g = noise(Shape::new(8, 8, 1), 4).map(|v| v + 3.0);
    let mask = make_lowpass(&FilterSpec::default(), 8, 8).unwrap();
    let r = reduce_band(&fft2(&g).unwrap(), &mask, 0.0, Band::Low).unwrap();
    assert_eq!(r.get(0, 4, 4).norm(), 0.0);
    let back = ifft2(&r).unwrap();
    assert!(back.data().iter().sum::<f64>().abs() < 1e-10);
}

#[test]
fn white_noise_low_band_energy_law() {
    let g = noise(Shape::new(32, 32, 2), 5);
    let mask = make_lowpass(&FilterSpec::default(), 32, 32).unwrap();
    let f = fft2(&g).unwrap();
    let r = reduce_band(&f, &mask, 0.7, Band::Low).unwrap();
    // Oracle: Σ|f·L·α|² versus Σ|f·L|², and the low component recovered as r − f⊙H.
    let (mut scaled, mut original, mut recovered) = (0.0, 0.0, 0.0);
    for (i, (fv, rv)) in f.data().iter().zip(r.data()).enumerate() {
        let m = mask.data()[i % 1024];
        scaled += (fv * m * 0.7).norm_sqr();
        original += (fv * m).norm_sqr();
        recovered += (rv - fv * (1.0 - m)).norm_sqr();
    }
    assert!((scaled / original - 0.49).abs() < 1e-12);
    assert!((recovered / original - 0.49).abs() < 1e-9);
}

#[test]
fn stripes_low_band_fraction_matches_dft_oracle() {
    let g = Grid::from_fn(Shape::new(16, 16, 1), |_, _, x| {
        if (x / 2) % 2 == 0 {
            1.0
        } else {
            -0.5
        }
    });
    let mask = make_lowpass(&FilterSpec::default(), 16, 16).unwrap();
    let s = fft2(&g).unwrap();
    let ours = band_energy(&s, &mask).unwrap() / s.energy();
    let dft = direct_dft(&g);
    let mut low = 0.0;
    let mut total = 0.0;
    for y in 0..16 {
        for x in 0..16 {
            let m = (-oracle_radius(y, x, 16, 16).powi(2) / 0.18).exp();
            low += (dft[y * 16 + x] * m).norm_sqr();
            total += dft[y * 16 + x].norm_sqr();
        }
    }
    assert!((ours - low / total).abs() < 1e-9);
    let ones = Grid::filled(Shape::new(16, 16, 1), 1.0);
    let direct: f64 = g.data().iter().map(|v| v * v).sum();
    assert!((band_energy(&s, &ones).unwrap() - direct).abs() < 1e-9 * direct);
}

#[test]
fn per_channel_masks_and_shape_errors() {
    let g = noise(Shape::new(6, 6, 2), 6);
    let s = fft2(&g).unwrap();
    let one = make_lowpass(&FilterSpec::default(), 6, 6).unwrap();
    let two = Grid::stack_channels(&[one.clone(), one.clone()]).unwrap();
    assert_eq!(
        reduce_band(&s, &one, 0.4, Band::High).unwrap(),
        reduce_band(&s, &two, 0.4, Band::High).unwrap()
    );
    let wrong = make_lowpass(&FilterSpec::default(), 6, 8).unwrap();
    assert!(reduce_band(&s, &wrong, 0.4, Band::Low).is_err());
    assert!(reduce_band(&s, &one, -0.1, Band::Low).is_err());
    assert!(band_energy(&s, &wrong).is_err());
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (2usize..12, 2usize..12, 1usize..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_of_unity(h in 2usize..40, w in 2usize..40, sigma in 0.05f64..2.0, cutoff in 0.05f64..1.0, order in 1u32..6) {
        for spec in [FilterSpec::Gaussian { sigma }, FilterSpec::Butterworth { cutoff, order }] {
            let low = make_lowpass(&spec, h, w).unwrap();
            let high = highpass_of(&low);
            for (l, hp) in low.data().iter().zip(high.data()) {
                prop_assert_eq!(l + hp, 1.0);
            }
        }
    }

    #[test]
    fn reduce_band_is_bin_exact((h, w, c) in dims(), alpha in 0.0f64..1.0, seed in 0u64..1000) {
        let g = noise(Shape::new(h, w, c), seed);
        let f = fft2(&g).unwrap();
        let mask = make_lowpass(&FilterSpec::default(), h, w).unwrap();
        let low = reduce_band(&f, &mask, alpha, Band::Low).unwrap();
        let high = reduce_band(&f, &mask, alpha, Band::High).unwrap();
        for (i, fv) in f.data().iter().enumerate() {
            let m = mask.data()[i % (h * w)];
            prop_assert_eq!(low.data()[i], alpha * (fv * m) + fv * (1.0 - m));
            prop_assert_eq!(high.data()[i], fv * m + alpha * (fv * (1.0 - m)));
        }
        prop_assert_eq!(reduce_band(&f, &mask, 1.0, Band::Low).unwrap(), f.clone());
        prop_assert_eq!(reduce_band(&f, &mask, 1.0, Band::High).unwrap(), f);
    }

    #[test]
    fn round_trip_any_size((h, w, c) in dims(), seed in 0u64..1000) {
        let g = noise(Shape::new(h, w, c), seed).scale(10.0);
        let back = ifft2(&fft2(&g).unwrap()).unwrap();
        prop_assert!(back.sub(&g).unwrap().max_abs() < 1e-10);
    }
}
