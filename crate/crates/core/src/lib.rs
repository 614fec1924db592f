//! Diffusion startpoint toolkit.
//!
//! Deterministic DDIM inversion and sampling over analytic score models,
//! classifier-free and negative guidance (including guidance applied during
//! inversion), and FFT-based low-frequency reduction of the inverted latent.

pub mod cli;
pub mod config;
pub mod ddim;
pub mod error;
pub mod features;
pub mod fourier;
pub mod grid;
pub mod guidance;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod schedule;
pub mod score;
pub mod selftest;
pub mod startpoint;
pub mod synthetic;

pub use error::{Error, Result, Stage};
pub use grid::{Grid, Shape, Spectrum};
