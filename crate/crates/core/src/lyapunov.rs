//! Discrete Lyapunov equation `S = θ S θᵀ + S_w`, whose solution is the
//! stationary covariance of `x_{t+1} = θ x_t + w_t`.

use serde::Serialize;

use crate::densela::{self, classify, Matrix, Stability};
use crate::error::{Error, Result};

/// Largest dimension for which the Kronecker solver is used by default.
pub const KRON_MAX_DIM: usize = 40;

const DOUBLING_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LyapunovMethod {
    Kron,
    Doubling,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryCovariance {
    pub s: Matrix,
    /// ‖S − θSθᵀ − S_w‖_F / ‖S‖_F.
    pub residual: f64,
    pub method: LyapunovMethod,
}

/// Solves the discrete Lyapunov equation, picking the Kronecker solver for
/// small systems and doubling otherwise.
pub fn solve_dlyap(theta: &Matrix, s_w: &Matrix) -> Result<StationaryCovariance> {
    let method = if theta.rows() <= KRON_MAX_DIM {
        LyapunovMethod::Kron
    } else {
        LyapunovMethod::Doubling
    };
    solve_dlyap_with(theta, s_w, method)
}

pub fn solve_dlyap_with(
    theta: &Matrix,
    s_w: &Matrix,
    method: LyapunovMethod,
) -> Result<StationaryCovariance> {
    let n = theta.ensure_square()?;
    if s_w.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "theta is {n}x{n} but S_w is {}x{}",
            s_w.rows(),
            s_w.cols()
        )));
    }
    densela::check_spd(s_w, "S_w")?;
    let rho = densela::spectral_radius(theta)?;
    if classify(rho) != Stability::Stable {
        return Err(Error::UnstableInput { rho });
    }
    let s = match method {
        LyapunovMethod::Kron => kron_solve(theta, s_w)?,
        LyapunovMethod::Doubling => doubling_solve(theta, s_w)?,
    }
    .symmetrize();
    let residual = lyapunov_residual(theta, s_w, &s);
    Ok(StationaryCovariance { s, residual, method })
}

/// Solves `X = θXθᵀ + C` for any symmetric `C` (no definiteness required),
/// with `θ` stable.
pub fn solve_stein(theta: &Matrix, c: &Matrix) -> Result<Matrix> {
    let n = theta.ensure_square()?;
    if c.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "theta is {n}x{n} but C is {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    let rho = densela::spectral_radius(theta)?;
    if classify(rho) != Stability::Stable {
        return Err(Error::UnstableInput { rho });
    }
    let x = if n <= KRON_MAX_DIM {
        kron_solve(theta, c)?
    } else {
        doubling_solve(theta, c)?
    };
    Ok(x.symmetrize())
}

/// Relative residual ‖S − θSθᵀ − S_w‖_F / ‖S‖_F.
pub fn lyapunov_residual(theta: &Matrix, s_w: &Matrix, s: &Matrix) -> f64 {
    let r = &(s - &theta.congruence(s)) - s_w;
    densela::frobenius_norm(&r) / densela::frobenius_norm(s).max(f64::MIN_POSITIVE)
}

/// (I − θ⊗θ) vec(S) = vec(S_w) with row-major vectorization.
fn kron_solve(theta: &Matrix, s_w: &Matrix) -> Result<Matrix> {
    let n = theta.rows();
    let nn = n * n;
    let system = &Matrix::identity(nn) - &theta.kron(theta);
    let rhs = Matrix::new(nn, 1, s_w.as_slice().to_vec())?;
    let vec_s = densela::solve_linear(&system, &rhs)?;
    Matrix::new(n, n, vec_s.into_vec())
}

/// S_{k+1} = S_k + A_k S_k A_kᵀ, A_{k+1} = A_k², starting from (S_w, θ).
fn doubling_solve(theta: &Matrix, s_w: &Matrix) -> Result<Matrix> {
    let mut a = theta.clone();
    let mut s = s_w.clone();
    for _ in 0..DOUBLING_MAX_ITER {
        let increment = a.congruence(&s);
        s = &s + &increment;
        if densela::frobenius_norm(&increment) <= f64::EPSILON * densela::frobenius_norm(&s) {
            return Ok(s);
        }
        a = &a * &a;
    }
    Err(Error::NoConvergence {
        what: "Lyapunov doubling",
        iterations: DOUBLING_MAX_ITER,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_dynamics_gives_noise_covariance() {
        let s = solve_dlyap(&Matrix::zeros(3, 3), &Matrix::identity(3)).unwrap();
        assert!(s.s.approx_eq(&Matrix::identity(3), 1e-15));
    }

    #[test]
    fn scalar_geometric_series() {
        for method in [LyapunovMethod::Kron, LyapunovMethod::Doubling] {
            let s = solve_dlyap_with(&Matrix::scalar(0.5), &Matrix::scalar(1.0), method).unwrap();
            assert!((s.s[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
            assert_eq!(s.method, method);
        }
    }

    #[test]
    fn unstable_input_rejected() {
        let err = solve_dlyap(&Matrix::scalar(1.0), &Matrix::scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::UnstableInput { .. }));
        let err = solve_dlyap(&Matrix::scalar(1.0 - 1e-13), &Matrix::scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::UnstableInput { .. }));
    }

    #[test]
    fn non_spd_noise_rejected() {
        let err = solve_dlyap(&Matrix::scalar(0.5), &Matrix::scalar(0.0)).unwrap_err();
        assert!(matches!(err, Error::NotSpd(_)));
    }

    #[test]
    fn trace_diverges_near_boundary() {
        let mut prev = 0.0;
        for theta in [0.9, 0.99, 0.999] {
            let s = solve_dlyap(&Matrix::scalar(theta), &Matrix::scalar(1.0)).unwrap();
            let tr = s.s.trace();
            assert!(tr > prev);
            assert!(tr > 1.0 / (1.0 - theta * theta) * (1.0 - 1e-6));
            prev = tr;
        }
    }

    #[test]
    fn stein_accepts_indefinite_right_side() {
        let theta = Matrix::from_rows(&[&[0.5, 0.2], &[0.0, -0.3]]).unwrap();
        let c = Matrix::diag(&[1.0, -2.0]);
        let x = solve_stein(&theta, &c).unwrap();
        let r = &(&x - &theta.congruence(&x)) - &c;
        assert!(densela::frobenius_norm(&r) < 1e-14);
        assert!(solve_stein(&Matrix::scalar(1.5), &Matrix::scalar(-1.0)).is_err());
    }
}
