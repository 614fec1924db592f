//! Seeded random streams. Every stochastic term in the toolkit draws from a
//! [`SeededRng`]; nothing reads ambient entropy.

use rand_distr::{Distribution, StandardNormal, Uniform};
use rand_pcg::Pcg64;

use crate::grid::{Grid, Shape};

/// Purpose label selecting an independent PCG stream for a given seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Additive noise of the frequency manipulation.
    Noise,
    /// Startpoint ablation variants.
    Variant,
    /// Parameter sweeps and synthetic fixtures.
    Sweep,
    Named(&'static str),
}

impl Stream {
    fn label(&self) -> &str {
        match self {
            Stream::Noise => "noise",
            Stream::Variant => "variant",
            Stream::Sweep => "sweep",
            Stream::Named(s) => s,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// PCG-64 (XSL-RR 128/64) keyed by `(seed, stream)`.
pub struct SeededRng {
    inner: Pcg64,
}

impl SeededRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let state =
            ((splitmix(seed) as u128) << 64) | splitmix(seed ^ 0x5851_f42d_4c95_7f2d) as u128;
        let id = fnv1a(stream.label().as_bytes());
        let increment = ((splitmix(id) as u128) << 64) | id as u128;
        Self {
            inner: Pcg64::new(state, increment),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        rand::Rng::next_u64(&mut self.inner)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        Uniform::new(lo, hi)
            .expect("uniform bounds are ordered")
            .sample(&mut self.inner)
    }

    pub fn normal_grid(&mut self, shape: Shape, std: f64) -> Grid {
        Grid::from_fn(shape, |_, _, _| std * self.normal())
    }

    pub fn uniform_grid(&mut self, shape: Shape, lo: f64, hi: f64) -> Grid {
        let dist = Uniform::new(lo, hi).expect("uniform bounds are ordered");
        Grid::from_fn(shape, |_, _, _| dist.sample(&mut self.inner))
    }
}
