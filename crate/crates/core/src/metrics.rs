//! Desk-scale evaluation: content distance, band statistics, Gaussian
//! Fréchet distance and the ArtFID composite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fourier::{band_energy, fft2, make_lowpass, FilterSpec};
use crate::grid::Grid;

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = -1e-8;

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn content_l2(a: &Grid, b: &Grid) -> Result<f64> {
    let reference = b.norm();
    if reference == 0.0 {
        return Err(Error::invalid("content_l2 reference has zero norm"));
    }
    Ok(a.sub(b)?.norm() / reference)
}

/// Fraction of spectral energy passed by the filter's low-pass mask.
pub fn band_ratio(g: &Grid, filter: &FilterSpec) -> Result<f64> {
    let s = fft2(g)?;
    let total = s.energy();
    if total == 0.0 {
        return Err(Error::invalid("band_ratio of a zero-energy grid"));
    }
    let mask = make_lowpass(filter, g.height(), g.width())?;
    Ok(band_energy(&s, &mask)? / total)
}

/// `(1 + content_dist)·(1 + style_dist)`.
pub fn artfid_composite(content_dist: f64, style_dist: f64) -> Result<f64> {
    if !(content_dist >= 0.0 && style_dist >= 0.0) {
        return Err(Error::invalid(format!(
            "artfid inputs must be >= 0, got ({content_dist}, {style_dist})"
        )));
    }
    Ok((1.0 + content_dist) * (1.0 + style_dist))
}

/// Gaussian summary of a set of feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub vectors: Vec<Vec<f64>>,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl FeatureSet {
    /// Sample mean and unbiased covariance (zero covariance for one vector).
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let d = vectors
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::invalid("feature set needs at least one vector"))?;
        if vectors.iter().any(|v| v.len() != d) {
            return Err(Error::invalid("feature vectors differ in length"));
        }
        let n = vectors.len();
        let mut mean = DVector::zeros(d);
        for v in &vectors {
            mean += DVector::from_column_slice(v);
        }
        mean /= n as f64;
        let mut cov = DMatrix::zeros(d, d);
        if n > 1 {
            for v in &vectors {
                let centered = DVector::from_column_slice(v) - &mean;
                cov += &centered * centered.transpose();
            }
            cov /= (n - 1) as f64;
        }
        Self::from_parts(vectors, mean, cov)
    }

    /// Feature set given directly by its moments.
    pub fn from_moments(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::from_parts(Vec::new(), mean, covariance)
    }

    fn from_parts(
        vectors: Vec<Vec<f64>>,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("{d}x{d} covariance"),
                found: format!("{}x{}", covariance.nrows(), covariance.ncols()),
            });
        }
        let asym = (&covariance - covariance.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!("covariance asymmetric by {asym:e}")));
        }
        let lowest = symmetric(&covariance).symmetric_eigenvalues().min();
        if d > 0 && lowest < PSD_TOL {
            return Err(Error::NotPsd(lowest));
        }
        Ok(Self {
            vectors,
            mean,
            covariance,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn symmetric(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Square root of a symmetric PSD matrix, clamping negative eigenvalues to 0.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetric(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `tr((Σ_p Σ_q)^{1/2})`, computed as `tr((√Σ_p Σ_q √Σ_p)^{1/2})`.
pub fn trace_sqrt_product(p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let root_p = psd_sqrt(p);
    let inner = symmetric(&(&root_p * q * &root_p));
    SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum()
}

/// `‖μ_p − μ_q‖² + tr(Σ_p + Σ_q − 2(Σ_p Σ_q)^{1/2})`, floored at 0.
pub fn frechet_gaussian(p: &FeatureSet, q: &FeatureSet) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("dimension {}", p.dim()),
            found: format!("dimension {}", q.dim()),
        });
    }
    let mean_term = (&p.mean - &q.mean).norm_squared();
    let cross = trace_sqrt_product(&p.covariance, &q.covariance);
    let d = mean_term + p.covariance.trace() + q.covariance.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}
