//! Dense real linear algebra: the matrix type, factorizations, spectra and
//! norms used by every other module.

mod eigen;
mod lu;
mod matrix;
mod symeig;
pub(crate) mod text;

pub use eigen::Spectrum;
pub use lu::Lu;
pub use matrix::Matrix;
pub use symeig::SymmetricEigen;

pub(crate) use eigen::{eigenvectors, CMatrix};

use crate::error::{Error, Result};

/// Half-width of the band around the unit circle in which a matrix is
/// classified as on the stability boundary.
pub const STABILITY_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Boundary,
    Unstable,
}

pub fn classify(rho: f64) -> Stability {
    if rho < 1.0 - STABILITY_BAND {
        Stability::Stable
    } else if rho <= 1.0 + STABILITY_BAND {
        Stability::Boundary
    } else {
        Stability::Unstable
    }
}

/// True when ρ(A) < 1 − [`STABILITY_BAND`].
pub fn is_stable(a: &Matrix) -> Result<bool> {
    Ok(classify(spectral_radius(a)?) == Stability::Stable)
}

pub fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    eigen::eigenvalues(a)
}

pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?.spectral_radius())
}

/// Largest singular value, `√ρ(AᵀA)`.
pub fn operator_norm(a: &Matrix) -> Result<f64> {
    let gram = &a.transpose() * a;
    Ok(SymmetricEigen::new(&gram)?.max().max(0.0).sqrt())
}

pub fn frobenius_norm(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// κ(A) = σ_max/σ_min. With `symmetric_pd` the ratio of extreme eigenvalues
/// is used directly.
pub fn condition_number(a: &Matrix, symmetric_pd: bool) -> Result<f64> {
    a.ensure_square()?;
    let (lo, hi) = if symmetric_pd {
        let e = SymmetricEigen::new(a)?;
        if e.min() <= 0.0 {
            return Err(Error::NotSpd(format!("eigenvalue {:e}", e.min())));
        }
        (e.min(), e.max())
    } else {
        let e = SymmetricEigen::new(&(&a.transpose() * a))?;
        (e.min().max(0.0).sqrt(), e.max().sqrt())
    };
    if lo <= hi * f64::EPSILON {
        return Err(Error::Singular { pivot: lo });
    }
    Ok(hi / lo)
}

pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Lu::factor(a)?.solve(b)
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    Lu::factor(a)?.inverse()
}

pub fn determinant(a: &Matrix) -> Result<f64> {
    match Lu::factor(a) {
        Ok(lu) => Ok(lu.determinant()),
        Err(Error::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Checks that `s` is symmetric positive definite, returning its smallest
/// eigenvalue.
pub fn check_spd(s: &Matrix, what: &str) -> Result<f64> {
    s.ensure_square()?;
    if !s.is_symmetric(1e-10) {
        return Err(Error::NotSpd(format!("{what} is not symmetric")));
    }
    let e = SymmetricEigen::new(s)?;
    if e.min() <= e.max().abs() * 1e-14 || e.min() <= 0.0 {
        return Err(Error::NotSpd(format!(
            "{what} has eigenvalue {:e}",
            e.min()
        )));
    }
    Ok(e.min())
}

/// Symmetric positive definite square root.
pub fn sqrt_spd(s: &Matrix) -> Result<Matrix> {
    check_spd(s, "input")?;
    Ok(SymmetricEigen::new(s)?.reconstruct_with(f64::sqrt))
}

/// Inverse of the SPD square root.
pub fn inv_sqrt_spd(s: &Matrix) -> Result<Matrix> {
    check_spd(s, "input")?;
    Ok(SymmetricEigen::new(s)?.reconstruct_with(|l| 1.0 / l.sqrt()))
}
