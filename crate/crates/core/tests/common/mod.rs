#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stablearn::densela::{self, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random SPD matrix G Gᵀ + floor·I.
pub fn spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Matrix {
    let g = gaussian(rng, n, n);
    (&(&g * &g.transpose()) + &Matrix::identity(n).scale(floor)).symmetrize()
}

/// Random matrix rescaled to the given spectral radius.
pub fn with_radius(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Matrix {
    loop {
        let a = gaussian(rng, n, n);
        let rho = densela::spectral_radius(&a).unwrap();
        if rho > 1e-3 {
            return a.scale(radius / rho);
        }
    }
}

pub fn to_na(a: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn rel_diff(a: &Matrix, b: &Matrix) -> f64 {
    densela::frobenius_norm(&(a - b)) / densela::frobenius_norm(b).max(f64::MIN_POSITIVE)
}

/// Brute-force minimizer of ½(θ' − θ)²/(1 − θ²) over a 1e-6 grid of (−1, 1).
pub fn scalar_grid_minimizer(theta_prime: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let steps = 2_000_000;
    for k in 1..steps {
        let t = -1.0 + k as f64 * 1e-6;
        let v = 0.5 * (theta_prime - t).powi(2) / (1.0 - t * t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best.1
}
